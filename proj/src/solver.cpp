#include "pessim/solver.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pessim {

Vector signed_occupancy(const OccupancyDist& measure, const Policy& pi) {
  const int S = pi.num_states(), A = pi.num_actions();
  if (measure.mass.rows() != S || measure.mass.cols() != A)
    throw InvalidInput("measure and policy disagree in shape");
  const Vector ms = measure.state_marginal();
  Vector c(S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) c(s * A + a) = measure.mass(s, a) - ms(s) * pi(s, a);
  return c;
}

namespace {

void check_problem(const TabularMDP& mdp, const OccupancyDist& measure, const Policy& pi,
                   double epsilon, double v_max) {
  if (!(epsilon >= 0.0)) throw InvalidInput("inner max: epsilon must be nonnegative");
  if (!(v_max > 0.0)) throw InvalidInput("inner max: v_max must be positive");
  if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() ||
      measure.mass.rows() != mdp.num_states() || measure.mass.cols() != mdp.num_actions())
    throw InvalidInput("inner max: shape mismatch");
}

/// The QCLP in flattened coordinates with the ellipsoid
/// (f - f0)' M (f - f0) <= eps, M = A' D A, diagonalized once.
struct Qclp {
  Vector c;
  Vector f0;
  double lo = 0.0;
  double hi = 0.0;
  double eps = 0.0;
  Matrix A;
  Vector rho;
  Matrix V;
  Vector lam;
  double lam_tol = 0.0;

  Vector clip(const Vector& y) const { return y.cwiseMax(lo).cwiseMin(hi); }

  bool in_box(const Vector& y, double tol) const {
    return y.minCoeff() >= lo - tol && y.maxCoeff() <= hi + tol;
  }

  double constraint(const Vector& f) const {
    const Vector g = A * f - A * f0;
    return (rho.array() * g.array().square()).sum();
  }

  Vector project_ellipsoid(const Vector& y) const {
    const Vector w = V.transpose() * (y - f0);
    auto phi = [&](double tau) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (lam(i) <= lam_tol) continue;
        const double d = 1.0 + tau * lam(i);
        s += lam(i) * w(i) * w(i) / (d * d);
      }
      return s;
    };
    if (phi(0.0) <= eps) return y;
    Vector z = w;
    if (eps == 0.0) {
      for (Eigen::Index i = 0; i < w.size(); ++i)
        if (lam(i) > lam_tol) z(i) = 0.0;
      return f0 + V * z;
    }
    // phi is convex and decreasing in tau, so Newton from 0 increases
    // monotonically to the root; a bracket guards against rounding.
    double tau = 0.0, lo_t = 0.0, hi_t = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
      const double f = phi(tau) - eps;
      if (f > 0.0) lo_t = tau; else hi_t = tau;
      if (std::abs(f) <= 1e-15 * eps) break;
      double dphi = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (lam(i) <= lam_tol) continue;
        const double d = 1.0 + tau * lam(i);
        dphi -= 2.0 * lam(i) * lam(i) * w(i) * w(i) / (d * d * d);
      }
      double next = dphi < 0.0 ? tau - f / dphi : hi_t;
      if (!(next > lo_t && next < hi_t)) next = std::isfinite(hi_t) ? 0.5 * (lo_t + hi_t) : 2.0 * tau + 1.0;
      if (next == tau) break;
      tau = next;
    }
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (lam(i) > lam_tol) z(i) = w(i) / (1.0 + tau * lam(i));
    return f0 + V * z;
  }

  /// Euclidean projection onto ellipsoid and box (Dykstra's alternating scheme).
  Vector project(const Vector& y) const {
    const Vector e = project_ellipsoid(y);
    if (in_box(e, 0.0)) return e;
    const Vector b = clip(y);
    if (constraint(b) <= eps) return b;
    Vector x = y, p = Vector::Zero(y.size()), q = Vector::Zero(y.size());
    const double scale = 1.0 + y.norm();
    for (int it = 0; it < 2000; ++it) {
      const Vector u = clip(x + p);
      p = x + p - u;
      const Vector xn = project_ellipsoid(u + q);
      q = u + q - xn;
      const double move = (xn - x).norm();
      x = xn;
      if (move <= 1e-15 * scale && (u - xn).norm() <= 1e-13 * scale) break;
    }
    return x;
  }
};

Qclp build_qclp(const TabularMDP& mdp, const OccupancyDist& measure, const Policy& pi,
                double epsilon, double v_max, bool& widened) {
  Qclp q;
  const int n = mdp.num_pairs();
  q.c = signed_occupancy(measure, pi);
  q.f0 = q_fixed_point(mdp, pi).flat();
  q.eps = epsilon;
  q.hi = v_max;
  q.lo = 0.0;
  const double tol = 1e-9 * std::max(1.0, v_max);
  widened = q.f0.minCoeff() < -tol;
  if (widened) q.lo = -v_max;
  if (q.f0.maxCoeff() > v_max + tol) throw InvalidInput("inner max: Q^pi exceeds v_max");
  q.A = Matrix::Identity(n, n) - mdp.gamma() * pair_transition(mdp, pi);
  q.rho = measure.flat();
  const Matrix M = q.A.transpose() * q.rho.asDiagonal() * q.A;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("inner max: eigendecomposition failed");
  q.V = eig.eigenvectors();
  q.lam = eig.eigenvalues().cwiseMax(0.0);
  q.lam_tol = 1e-13 * std::max(q.lam.maxCoeff(), 1e-300);
  return q;
}

InnerMaxResult solve_projected_gradient(const Qclp& q, const QclpOptions& opts, int num_states,
                                        int num_actions) {
  const Eigen::Index n = q.c.size();
  InnerMaxResult best;
  best.value = -std::numeric_limits<double>::infinity();
  const double cn = q.c.norm();
  if (cn == 0.0) {
    best.value = 0.0;
    best.witness = QFunction::from_flat(q.f0, num_states, num_actions);
    best.constraint_value = q.constraint(q.f0);
    return best;
  }
  const double diam = (q.hi - q.lo) * std::sqrt(static_cast<double>(n));
  const double step = diam / cn;
  Rng rng(opts.seed);
  for (int start = 0; start < std::max(1, opts.starts); ++start) {
    Vector x(n);
    if (start == 0) {
      x = q.clip(q.f0);
    } else {
      for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.uniform(q.lo, q.hi);
    }
    x = q.project(x);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
      const Vector xn = q.project(x + step * q.c);
      const double move = (xn - x).norm();
      x = xn;
      if (move <= opts.tolerance * (1.0 + x.norm())) break;
    }
    const double value = q.c.dot(x);
    if (value > best.value) {
      best.value = value;
      best.witness = QFunction::from_flat(x, num_states, num_actions);
      best.constraint_value = q.constraint(x);
    }
    best.iterations += it;
  }
  return best;
}

}  // namespace

ClosedFormSolution inner_max_closed_form(const TabularMDP& mdp, const OccupancyDist& measure,
                                         const Policy& pi, double epsilon, double v_max) {
  check_problem(mdp, measure, pi, epsilon, v_max);
  const Vector rho = measure.flat();
  if (rho.minCoeff() <= 0.0) throw InvalidInput("closed form needs a measure with full support");
  const int n = mdp.num_pairs();
  const Matrix A = Matrix::Identity(n, n) - mdp.gamma() * pair_transition(mdp, pi);
  const Eigen::PartialPivLU<Matrix> lu(A);
  const Vector c = signed_occupancy(measure, pi);
  const Vector q = lu.solve(mdp.reward_vector());
  const Vector u = lu.transpose().solve(c);
  const Vector dinv_u = u.cwiseQuotient(rho);
  const double s = u.dot(dinv_u);
  ClosedFormSolution out;
  Vector f = q;
  out.value = c.dot(q);
  if (s > 0.0 && epsilon > 0.0) {
    const Vector g = std::sqrt(epsilon / s) * dinv_u;
    f = lu.solve(mdp.reward_vector() + g);
    out.value += std::sqrt(epsilon * s);
  }
  out.witness = QFunction::from_flat(f, mdp.num_states(), mdp.num_actions());
  const double tol = 1e-12 * v_max;
  out.in_box = f.minCoeff() >= -tol && f.maxCoeff() <= v_max + tol;
  return out;
}

InnerMaxResult inner_max_population_oracle(const TabularMDP& mdp, const OccupancyDist& measure,
                                           const Policy& pi, double epsilon, double v_max,
                                           const QclpOptions& opts) {
  check_problem(mdp, measure, pi, epsilon, v_max);
  const bool full_support = measure.mass.minCoeff() > 0.0;
  if (opts.method == QclpOptions::Method::kClosedForm || (opts.method == QclpOptions::Method::kAuto && full_support)) {
    const ClosedFormSolution cf = inner_max_closed_form(mdp, measure, pi, epsilon, v_max);
    if (opts.method == QclpOptions::Method::kClosedForm || cf.in_box) {
      InnerMaxResult out;
      out.value = cf.value;
      out.witness = cf.witness;
      out.used_closed_form = true;
      out.box_active = !cf.in_box;
      const Matrix diff = cf.witness.values - bellman_apply(mdp, pi, cf.witness).values;
      out.constraint_value = (measure.mass.array() * diff.array().square()).sum();
      return out;
    }
  }
  bool widened = false;
  const Qclp q = build_qclp(mdp, measure, pi, epsilon, v_max, widened);
  InnerMaxResult out = solve_projected_gradient(q, opts, mdp.num_states(), mdp.num_actions());
  out.widened_box = widened;
  out.restricted_support = !full_support;
  if (full_support) {
    const ClosedFormSolution cf = inner_max_closed_form(mdp, measure, pi, epsilon, v_max);
    out.box_active = !cf.in_box;
  } else {
    out.box_active = true;
  }
  return out;
}

InnerMaxResult inner_max_population_oracle(const TabularMDP& mdp, const Policy& mu,
                                           const Policy& pi, double epsilon, double v_max,
                                           const QclpOptions& opts) {
  return inner_max_population_oracle(mdp, discounted_occupancy(mdp, mu), pi, epsilon, v_max, opts);
}

// ---------------------------------------------------------------------------

std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::kHinge: return "hinge";
    case PenaltyKind::kQuadratic: return "quadratic";
    case PenaltyKind::kAugmentedLagrangian: return "augmented-lagrangian";
  }
  return "hinge";
}

std::string to_string(CriticKind k) {
  return k == CriticKind::kTabular ? "tabular" : "network";
}

std::string to_string(PolicyParam k) {
  return k == PolicyParam::kTabularSoftmax ? "tabular-softmax" : "network-density";
}

PenaltyKind parse_penalty(const std::string& s) {
  if (s == "hinge") return PenaltyKind::kHinge;
  if (s == "quadratic") return PenaltyKind::kQuadratic;
  if (s == "augmented-lagrangian") return PenaltyKind::kAugmentedLagrangian;
  throw InvalidInput("unknown penalty kind: " + s);
}

CriticKind parse_critic(const std::string& s) {
  if (s == "tabular") return CriticKind::kTabular;
  if (s == "network") return CriticKind::kNetwork;
  throw InvalidInput("unknown critic kind: " + s);
}

PolicyParam parse_policy_param(const std::string& s) {
  if (s == "tabular-softmax") return PolicyParam::kTabularSoftmax;
  if (s == "network-density") return PolicyParam::kNetworkDensity;
  throw InvalidInput("unknown policy parameterization: " + s);
}

void SolverConfig::validate() const {
  if (!(epsilon >= 0.0)) throw InvalidInput("solver: epsilon must be nonnegative");
  if (!(lagrange_beta >= 0.0)) throw InvalidInput("solver: lagrange_beta must be nonnegative");
  if (outer_steps < 1 || inner_steps < 1) throw InvalidInput("solver: steps must be >= 1");
  if (!(critic_step > 0.0) || !(policy_step > 0.0)) throw InvalidInput("solver: step sizes must be positive");
  if (v_max < 0.0) throw InvalidInput("solver: v_max must be nonnegative");
  for (int w : critic_hidden)
    if (w < 1) throw InvalidInput("solver: critic widths must be positive");
  for (int w : policy_hidden)
    if (w < 1) throw InvalidInput("solver: policy widths must be positive");
}

nlohmann::json to_json(const SolverConfig& cfg) {
  return {{"epsilon", cfg.epsilon},
          {"lagrange_beta", cfg.lagrange_beta},
          {"outer_steps", cfg.outer_steps},
          {"inner_steps", cfg.inner_steps},
          {"critic_step", cfg.critic_step},
          {"policy_step", cfg.policy_step},
          {"v_max", cfg.v_max},
          {"seed", cfg.seed},
          {"policy_parameterization", to_string(cfg.policy_parameterization)},
          {"critic", to_string(cfg.critic)},
          {"penalty", to_string(cfg.penalty)},
          {"critic_hidden", cfg.critic_hidden},
          {"policy_hidden", cfg.policy_hidden},
          {"embed", cfg.embed.name()},
          {"embed_dim", cfg.embed.ambient_dim}};
}

// ---------------------------------------------------------------------------

Critic Critic::tabular(const QFunction& init, double v_max) {
  Critic c;
  c.kind_ = CriticKind::kTabular;
  c.v_max_ = v_max;
  c.num_states_ = static_cast<int>(init.values.rows());
  c.num_actions_ = static_cast<int>(init.values.cols());
  c.table_ = {init.values.cwiseMax(0.0).cwiseMin(v_max)};
  return c;
}

Critic Critic::network(Network net, Matrix table, int num_states, int num_actions, double v_max) {
  if (table.cols() != static_cast<Eigen::Index>(num_states) * num_actions || table.rows() != net.input_dim())
    throw InvalidInput("critic network: embedding table shape mismatch");
  Critic c;
  c.kind_ = CriticKind::kNetwork;
  c.v_max_ = v_max;
  c.num_states_ = num_states;
  c.num_actions_ = num_actions;
  c.net_ = std::move(net);
  c.embed_ = std::move(table);
  return c;
}

QFunction Critic::values() const {
  if (kind_ == CriticKind::kTabular) return table_;
  QFunction q = critic_table(net_, embed_, num_states_, num_actions_);
  q.values = q.values.cwiseMax(0.0).cwiseMin(v_max_);
  return q;
}

void Critic::ascend(const Matrix& grad, double step) {
  if (kind_ == CriticKind::kTabular) {
    table_.values = (table_.values + step * grad).cwiseMax(0.0).cwiseMin(v_max_);
    return;
  }
  const Matrix raw = forward_batch(net_, embed_);
  Matrix g(1, raw.cols());
  for (Eigen::Index k = 0; k < raw.cols(); ++k) {
    const double gk = grad(k / num_actions_, k % num_actions_);
    const double y = raw(0, k);
    // Clipped outputs only pass gradients that point back into the box.
    const bool pass = (y > 0.0 && y < v_max_) || (y <= 0.0 && gk > 0.0) || (y >= v_max_ && gk < 0.0);
    g(0, k) = pass ? gk : 0.0;
  }
  Vector params = net_.flat_params();
  params += step * backward(net_, embed_, g);
  if (!params.allFinite()) throw NumericalError("critic network diverged");
  net_.set_flat_params(params);
}

void Critic::fit(const QFunction& target, int steps, double learning_rate) {
  if (kind_ == CriticKind::kTabular) {
    table_ = {target.values.cwiseMax(0.0).cwiseMin(v_max_)};
    return;
  }
  const Vector y = target.flat();
  const double n = static_cast<double>(y.size());
  Vector params = net_.flat_params();
  for (int it = 0; it < steps; ++it) {
    const Matrix pred = forward_batch(net_, embed_);
    const Matrix g = (2.0 / n) * (pred - y.transpose());
    params -= learning_rate * backward(net_, embed_, g);
    if (!params.allFinite()) throw NumericalError("critic regression diverged");
    net_.set_flat_params(params);
  }
}

double penalty_weight(PenaltyKind kind, double beta, double multiplier, double g) {
  switch (kind) {
    case PenaltyKind::kHinge: return g > 0.0 ? beta : 0.0;
    case PenaltyKind::kQuadratic: return 2.0 * beta * std::max(0.0, g);
    case PenaltyKind::kAugmentedLagrangian: return std::max(0.0, multiplier + beta * g);
  }
  return 0.0;
}

namespace {

double penalty_value(PenaltyKind kind, double beta, double multiplier, double g) {
  switch (kind) {
    case PenaltyKind::kHinge: return beta * std::max(0.0, g);
    case PenaltyKind::kQuadratic: return beta * std::max(0.0, g) * std::max(0.0, g);
    case PenaltyKind::kAugmentedLagrangian: {
      if (beta == 0.0) return multiplier * g;
      const double t = std::max(0.0, multiplier + beta * g);
      return (t * t - multiplier * multiplier) / (2.0 * beta);
    }
  }
  return 0.0;
}

double resolve_v_max(const SolverConfig& cfg, const TabularMDP& mdp) {
  return cfg.v_max > 0.0 ? cfg.v_max : mdp.v_max();
}

bool failed_constraint(double slack, double epsilon) {
  return epsilon > 0.0 ? slack > 10.0 * epsilon : slack > 1e-6;
}

/// Largest eigenvalue of 2 A' D A (the Hessian of E_D in f away from the
/// clip), A = I - gamma P^pi on the empirical kernel, by power iteration.
double error_curvature(const EmpiricalModel& model, const Policy& pi, double gamma) {
  const int S = model.num_states, A = model.num_actions;
  auto apply_a = [&](const Vector& x) {
    const Vector v = state_values(QFunction::from_flat(x, S, A), pi);
    return Vector(x - gamma * model.next * v);
  };
  auto apply_at = [&](const Vector& y) {
    // (P^pi)' y: mass P(s'|k) y_k lands on (s', a') with weight pi(a'|s').
    const Vector back = model.next.transpose() * y;
    Vector out = y;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) out(s * A + a) -= gamma * back(s) * pi(s, a);
    return out;
  };
  Vector x = Vector::Ones(S * A) / std::sqrt(static_cast<double>(S * A));
  double lam = 0.0;
  for (int it = 0; it < 30; ++it) {
    const Vector y = apply_at(model.weight.cwiseProduct(apply_a(x)));
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    lam = norm;
    x = y / norm;
  }
  return 2.0 * lam;
}

}  // namespace

AdversarialResult inner_max_adversarial(const EmpiricalModel& model, const TabularMDP& mdp,
                                        const Policy& pi, Critic critic, const SolverConfig& cfg,
                                        PenaltyState* penalty, int multiplier_period) {
  cfg.validate();
  if (pi.num_states() != model.num_states || pi.num_actions() != model.num_actions)
    throw InvalidInput("inner_max_adversarial: policy shape mismatch");
  const double gamma = mdp.gamma();
  const double v_max = resolve_v_max(cfg, mdp);
  PenaltyState local;
  PenaltyState& state = penalty ? *penalty : local;
  const double curvature = error_curvature(model, pi, gamma);
  for (int step = 0; step < cfg.inner_steps; ++step) {
    const QFunction f = critic.values();
    const ErrorGradient eg = empirical_error_gradient(model, pi, f, gamma, v_max);
    const ErrorGradient rg = empirical_r_gradient(model, pi, f);
    const double g = eg.value - cfg.epsilon;
    const double w = penalty_weight(cfg.penalty, cfg.lagrange_beta, state.multiplier, g);
    critic.ascend(rg.d_f - w * eg.d_f, cfg.critic_step / (1.0 + w * curvature));
    if (cfg.penalty == PenaltyKind::kAugmentedLagrangian && (step + 1) % multiplier_period == 0) {
      const double gn = empirical_error(model, pi, critic.values(), gamma, v_max) - cfg.epsilon;
      state.multiplier = std::max(0.0, state.multiplier + cfg.lagrange_beta * gn);
    }
  }
  const QFunction f = critic.values();
  AdversarialResult out{.critic = critic};
  out.value = empirical_r(model, pi, f);
  out.bellman_error = empirical_error(model, pi, f, gamma, v_max);
  out.slack = out.bellman_error - cfg.epsilon;
  out.constraint_failure = failed_constraint(out.slack, cfg.epsilon);
  out.multiplier = state.multiplier;
  if (!std::isfinite(out.value) || !std::isfinite(out.bellman_error))
    throw NumericalError("inner_max_adversarial: non-finite objective");
  return out;
}

Critic initial_critic(const EmpiricalModel& model, const TabularMDP& mdp, const Policy& pi,
                      const SolverConfig& cfg) {
  const double v_max = resolve_v_max(cfg, mdp);
  const QFunction q = q_fixed_point(empirical_mdp(model, mdp), pi);
  if (cfg.critic == CriticKind::kTabular) return Critic::tabular(q, v_max);
  const Matrix table = embedding_table(cfg.embed, mdp.num_states(), mdp.num_actions());
  Network net = Network::random(cfg.embed.ambient_dim, cfg.critic_hidden, 1, derive_seed(cfg.seed, 1));
  Critic c = Critic::network(std::move(net), table, mdp.num_states(), mdp.num_actions(), v_max);
  c.fit(q, 4000, 0.01 / std::max(1.0, v_max));
  return c;
}

double policy_entropy(const Policy& pi) {
  double h = 0.0;
  for (int s = 0; s < pi.num_states(); ++s)
    for (int a = 0; a < pi.num_actions(); ++a) {
      const double p = pi(s, a);
      if (p > 0.0) h -= p * std::log(p);
    }
  return h / pi.num_states();
}

namespace {

Policy softmax_policy(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const double m = logits.row(s).maxCoeff();
    p.row(s) = (logits.row(s).array() - m).exp().matrix();
    p.row(s) /= p.row(s).sum();
  }
  return Policy(p);
}

/// d/dlogit of a function with gradient `grad_pi` with respect to pi.
Matrix softmax_backward(const Policy& pi, const Matrix& grad_pi) {
  Matrix out(grad_pi.rows(), grad_pi.cols());
  for (Eigen::Index s = 0; s < grad_pi.rows(); ++s) {
    const double avg = pi.probs().row(s).dot(grad_pi.row(s));
    for (Eigen::Index a = 0; a < grad_pi.cols(); ++a) out(s, a) = pi(s, a) * (grad_pi(s, a) - avg);
  }
  return out;
}

}  // namespace

SolveResult solve_empirical_minimax(const Dataset& ds, const TabularMDP& mdp, const SolverConfig& cfg) {
  cfg.validate();
  const int S = mdp.num_states(), A = mdp.num_actions();
  ds.validate(S, A);
  const EmpiricalModel model = empirical_model(ds, S, A);
  const double gamma = mdp.gamma();
  const double v_max = resolve_v_max(cfg, mdp);

  const bool net_policy = cfg.policy_parameterization == PolicyParam::kNetworkDensity;
  const Matrix table = embedding_table(cfg.embed, S, A);
  Matrix logits = Matrix::Zero(S, A);
  Network policy_net;
  if (net_policy) {
    policy_net = Network::random(cfg.embed.ambient_dim, cfg.policy_hidden, 1, derive_seed(cfg.seed, 2));
    // Start from the uniform policy: zero output layer.
    auto& out = policy_net.layers().back();
    out.weight.setZero();
    out.bias.setZero();
  }
  auto current_policy = [&]() {
    if (!net_policy) return softmax_policy(logits);
    const Matrix raw = forward_batch(policy_net, table);
    Matrix l(S, A);
    for (int k = 0; k < S * A; ++k) l(k / A, k % A) = raw(0, k);
    return softmax_policy(l);
  };

  Policy pi = current_policy();
  Critic critic = initial_critic(model, mdp, pi, cfg);
  PenaltyState penalty;
  SolveResult result;
  Policy previous = pi;
  double last_change = std::numeric_limits<double>::infinity();
  for (int t = 0; t < cfg.outer_steps; ++t) {
    const AdversarialResult inner = inner_max_adversarial(model, mdp, pi, critic, cfg, &penalty);
    critic = inner.critic;
    const QFunction f = critic.values();

    const ErrorGradient eg = empirical_error_gradient(model, pi, f, gamma, v_max);
    const ErrorGradient rg = empirical_r_gradient(model, pi, f);
    const double g = eg.value - cfg.epsilon;
    const double w = penalty_weight(cfg.penalty, cfg.lagrange_beta, penalty.multiplier, g);
    const Matrix grad_logits = softmax_backward(pi, rg.d_pi - w * eg.d_pi);

    TraceRow row;
    row.iteration = t;
    row.r_d = rg.value;
    row.slack = g;
    row.lagrange_value = rg.value - penalty_value(cfg.penalty, cfg.lagrange_beta, penalty.multiplier, g);
    row.entropy = policy_entropy(pi);
    if (!std::isfinite(row.r_d) || !std::isfinite(row.lagrange_value))
      throw NumericalError("solve_empirical_minimax: non-finite loss");
    result.trace.push_back(row);

    if (net_policy) {
      Matrix g_out(1, S * A);
      for (int k = 0; k < S * A; ++k) g_out(0, k) = grad_logits(k / A, k % A);
      Vector params = policy_net.flat_params();
      params -= cfg.policy_step * backward(policy_net, table, g_out);
      if (!params.allFinite()) throw NumericalError("policy network diverged");
      policy_net.set_flat_params(params);
    } else {
      logits -= cfg.policy_step * grad_logits;
    }
    previous = pi;
    pi = current_policy();
    last_change = (pi.probs() - previous.probs()).cwiseAbs().maxCoeff();
  }

  const QFunction f = critic.values();
  result.policy_hat = pi;
  result.critic_hat = f;
  if (critic.is_network()) result.critic_net = critic.net();
  if (net_policy) result.policy_net = policy_net;
  result.final_slack = empirical_error(model, pi, f, gamma, v_max) - cfg.epsilon;
  result.constraint_failure = failed_constraint(result.final_slack, cfg.epsilon);
  result.converged = last_change < 1e-5 && !result.constraint_failure;
  return result;
}

std::string trace_csv(const SolveResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,r_d,slack,lagrange_value,entropy\n";
  for (const auto& r : result.trace)
    out << r.iteration << ',' << r.r_d << ',' << r.slack << ',' << r.lagrange_value << ',' << r.entropy << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

Matrix project_rows_to_simplex(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    std::vector<double> u(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index a = 0; a < m.cols(); ++a) u[static_cast<std::size_t>(a)] = m(s, a);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      cum += u[j];
      const double t = (cum - 1.0) / static_cast<double>(j + 1);
      if (u[j] - t > 0.0) theta = t;
    }
    for (Eigen::Index a = 0; a < m.cols(); ++a) out(s, a) = std::max(0.0, m(s, a) - theta);
    out.row(s) /= out.row(s).sum();
  }
  return out;
}

double policy_grid_size(int num_states, int num_actions, double resolution) {
  const int k = static_cast<int>(std::lround(1.0 / resolution));
  // C(k + A - 1, A - 1) points per state.
  double per_state = 1.0;
  for (int i = 1; i < num_actions; ++i) per_state = per_state * (k + i) / i;
  return std::pow(per_state, num_states);
}

namespace {

/// Compositions of k into `parts` nonnegative integers, lexicographic.
void compositions(int k, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(k);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int i = 0; i <= k; ++i) {
    cur.push_back(i);
    compositions(k - i, parts - 1, cur, out);
    cur.pop_back();
  }
}

struct PolicyObjective {
  const TabularMDP& mdp;
  const OccupancyDist& measure;
  double epsilon;
  double v_max;
  QclpOptions qclp;
  std::size_t evaluations = 0;

  double operator()(const Matrix& probs) {
    ++evaluations;
    return inner_max_population_oracle(mdp, measure, Policy(probs), epsilon, v_max, qclp).value;
  }
};

/// Projected gradient descent on the policy simplex with central-difference
/// gradients and a backtracking step.
Matrix refine_policy(PolicyObjective& obj, Matrix probs, double& value, int iterations) {
  const double h = 1e-6;
  double step = 0.1;
  for (int it = 0; it < iterations && step > 1e-10; ++it) {
    Matrix grad = Matrix::Zero(probs.rows(), probs.cols());
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
      for (Eigen::Index a = 0; a < probs.cols(); ++a) {
        // Move mass between a and the rest of the row so the point stays a policy.
        Matrix plus = probs, minus = probs;
        plus(s, a) += h;
        minus(s, a) -= h;
        plus = project_rows_to_simplex(plus);
        minus = project_rows_to_simplex(minus);
        const double dist = (plus - minus).norm();
        if (dist == 0.0) continue;
        grad(s, a) = (obj(plus) - obj(minus)) / (2.0 * h);
      }
    }
    bool moved = false;
    while (step > 1e-10) {
      const Matrix cand = project_rows_to_simplex(probs - step * grad);
      const double v = obj(cand);
      if (v < value - 1e-15) {
        probs = cand;
        value = v;
        step *= 1.5;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return probs;
}

}  // namespace

OraclePolicy oracle_policy_solve(const TabularMDP& mdp, const OccupancyDist& measure,
                                 double epsilon, double v_max, const OraclePolicyOptions& opts) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  if (!(opts.resolution > 0.0) || opts.resolution > 1.0) throw InvalidInput("oracle: resolution must lie in (0,1]");
  PolicyObjective obj{mdp, measure, epsilon, v_max, opts.qclp};
  const double grid = policy_grid_size(S, A, opts.resolution);
  const bool grid_ok = S * A <= 16 && grid <= 5e6;
  OraclePolicy out;
  if (A == 1) {
    out.policy = Policy(Matrix::Ones(S, 1));
    out.value = obj(out.policy.probs());
    out.evaluations = obj.evaluations;
    return out;
  }
  const auto mode = opts.mode == OraclePolicyOptions::Mode::kAuto
                        ? (grid_ok ? OraclePolicyOptions::Mode::kGrid : OraclePolicyOptions::Mode::kMultiStart)
                        : opts.mode;
  if (mode == OraclePolicyOptions::Mode::kGrid) {
    if (!grid_ok) throw InvalidInput("oracle grid search is limited to |S||A| <= 16");
    const int k = static_cast<int>(std::lround(1.0 / opts.resolution));
    std::vector<std::vector<int>> rows;
    std::vector<int> cur;
    compositions(k, A, cur, rows);
    std::vector<std::size_t> idx(static_cast<std::size_t>(S), 0);
    Matrix probs(S, A);
    double best = std::numeric_limits<double>::infinity();
    Matrix best_probs = Matrix::Constant(S, A, 1.0 / A);
    while (true) {
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) probs(s, a) = static_cast<double>(rows[idx[s]][a]) / k;
      const double v = obj(probs);
      if (v < best) {
        best = v;
        best_probs = probs;
      }
      int s = S - 1;
      while (s >= 0 && ++idx[static_cast<std::size_t>(s)] == rows.size()) {
        idx[static_cast<std::size_t>(s)] = 0;
        --s;
      }
      if (s < 0) break;
    }
    if (opts.refine) best_probs = refine_policy(obj, best_probs, best, opts.iterations);
    out.policy = Policy(best_probs);
    out.value = best;
    out.used_grid = true;
  } else {
    Rng rng(opts.seed);
    double best = std::numeric_limits<double>::infinity();
    Matrix best_probs;
    for (int start = 0; start < std::max(1, opts.starts); ++start) {
      Matrix probs = start == 0 ? Matrix::Constant(S, A, 1.0 / A) : random_policy(S, A, rng).probs();
      double v = obj(probs);
      probs = refine_policy(obj, probs, v, opts.iterations);
      if (v < best) {
        best = v;
        best_probs = probs;
      }
    }
    out.policy = Policy(best_probs);
    out.value = best;
  }
  out.evaluations = obj.evaluations;
  return out;
}

ExcessRisk excess_risk(const TabularMDP& mdp, const OccupancyDist& measure, const Policy& pi_hat,
                       const OraclePolicy& oracle, double epsilon, double v_max,
                       const QclpOptions& qclp) {
  ExcessRisk out;
  out.r_hat = inner_max_population_oracle(mdp, measure, pi_hat, epsilon, v_max, qclp).value;
  out.r_star = oracle.value;
  out.value = out.r_hat - out.r_star;
  out.negative = out.value < 0.0;
  out.reported = std::max(0.0, out.value);
  return out;
}

Policy optimal_policy(const TabularMDP& mdp) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<int> actions(static_cast<std::size_t>(S), 0);
  for (int it = 0; it < 1000; ++it) {
    const Policy pi = Policy::deterministic(A, actions);
    const QFunction q = q_fixed_point(mdp, pi);
    bool changed = false;
    for (int s = 0; s < S; ++s) {
      int best = actions[static_cast<std::size_t>(s)];
      for (int a = 0; a < A; ++a)
        if (q.values(s, a) > q.values(s, best) + 1e-12) best = a;
      if (best != actions[static_cast<std::size_t>(s)]) {
        actions[static_cast<std::size_t>(s)] = best;
        changed = true;
      }
    }
    if (!changed) return pi;
  }
  throw NumericalError("policy iteration did not converge");
}

}  // namespace pessim
