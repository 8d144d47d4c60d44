#include "pessim/bellman.hpp"

#include <algorithm>
#include <cmath>

namespace pessim {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kLPopulation: return "L-population";
    case LossKind::kLEmpirical: return "L-empirical";
    case LossKind::kRPopulation: return "R-population";
    case LossKind::kREmpirical: return "R-empirical";
  }
  return "L-population";
}

LossValue LossValue::negated() const {
  LossKind k = kind;
  switch (kind) {
    case LossKind::kLPopulation: k = LossKind::kRPopulation; break;
    case LossKind::kLEmpirical: k = LossKind::kREmpirical; break;
    case LossKind::kRPopulation: k = LossKind::kLPopulation; break;
    case LossKind::kREmpirical: k = LossKind::kLEmpirical; break;
  }
  return {-value, k};
}

namespace {

void check_shapes(const TabularMDP& mdp, const Policy& pi, const QFunction& f) {
  if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() ||
      f.values.rows() != mdp.num_states() || f.values.cols() != mdp.num_actions())
    throw InvalidInput("shape mismatch between MDP, policy and Q-table");
}

void check_dataset(const Dataset& ds, const Policy& pi, const QFunction& f) {
  if (ds.transitions.empty()) throw InvalidInput("empty dataset");
  if (f.values.rows() != pi.num_states() || f.values.cols() != pi.num_actions())
    throw InvalidInput("shape mismatch between policy and Q-table");
  for (const auto& tr : ds.transitions) {
    if (tr.s < 0 || tr.s >= pi.num_states() || tr.s_next < 0 || tr.s_next >= pi.num_states() ||
        tr.a < 0 || tr.a >= pi.num_actions())
      throw InvalidInput("dataset index out of range");
  }
}

}  // namespace

BellmanErrorValue population_bellman_error(const TabularMDP& mdp, const OccupancyDist& measure,
                                           const Policy& pi, const QFunction& f) {
  check_shapes(mdp, pi, f);
  if (measure.mass.rows() != mdp.num_states() || measure.mass.cols() != mdp.num_actions())
    throw InvalidInput("measure shape mismatch");
  const Matrix diff = f.values - bellman_apply(mdp, pi, f).values;
  BellmanErrorValue out;
  out.kind = ErrorKind::kPopulation;
  out.value = (measure.mass.array() * diff.array().square()).sum();
  return out;
}

BellmanErrorValue population_bellman_error(const TabularMDP& mdp, const Policy& mu,
                                           const Policy& pi, const QFunction& f) {
  return population_bellman_error(mdp, discounted_occupancy(mdp, mu), pi, f);
}

LossValue loss_population(const OccupancyDist& measure, const Policy& pi, const QFunction& f) {
  if (measure.mass.rows() != f.values.rows() || measure.mass.cols() != f.values.cols() ||
      pi.num_states() != f.values.rows() || pi.num_actions() != f.values.cols())
    throw InvalidInput("shape mismatch in loss_population");
  const Vector v = state_values(f, pi);
  double total = 0.0;
  for (Eigen::Index s = 0; s < f.values.rows(); ++s)
    for (Eigen::Index a = 0; a < f.values.cols(); ++a)
      total += measure.mass(s, a) * (v(s) - f.values(s, a));
  return {total, LossKind::kLPopulation};
}

LossValue loss_population(const TabularMDP& mdp, const Policy& mu, const Policy& pi,
                          const QFunction& f) {
  check_shapes(mdp, pi, f);
  return loss_population(discounted_occupancy(mdp, mu), pi, f);
}

BellmanErrorValue empirical_bellman_error(const Dataset& ds, const TabularMDP& mdp,
                                          const Policy& pi, const QFunction& f) {
  check_shapes(mdp, pi, f);
  check_dataset(ds, pi, f);
  const int A = mdp.num_actions();
  const double gamma = mdp.gamma();
  const double v_max = mdp.v_max();
  const Vector v = state_values(f, pi);
  const auto n = static_cast<double>(ds.size());

  Vector sum = Vector::Zero(mdp.num_pairs());
  Vector count = Vector::Zero(mdp.num_pairs());
  for (const auto& tr : ds.transitions) {
    const int k = tr.s * A + tr.a;
    sum(k) += tr.r + gamma * v(tr.s_next);
    count(k) += 1.0;
  }
  Vector fit = Vector::Zero(mdp.num_pairs());
  int empty = 0;
  for (Eigen::Index k = 0; k < fit.size(); ++k) {
    if (count(k) == 0.0) {
      ++empty;
      continue;
    }
    fit(k) = std::clamp(sum(k) / count(k), 0.0, v_max);
  }

  double first = 0.0, inner = 0.0;
  for (const auto& tr : ds.transitions) {
    const int k = tr.s * A + tr.a;
    const double y = tr.r + gamma * v(tr.s_next);
    const double e1 = f.values(tr.s, tr.a) - y;
    const double e2 = fit(k) - y;
    first += e1 * e1;
    inner += e2 * e2;
  }
  BellmanErrorValue out;
  out.kind = ErrorKind::kEmpirical;
  out.inner_min_residual = inner / n;
  out.value = first / n - inner / n;
  out.empty_cells = empty;
  out.negative = out.value < -kNegativeTolerance;
  return out;
}

LossValue loss_empirical(const Dataset& ds, const Policy& pi, const QFunction& f) {
  check_dataset(ds, pi, f);
  const Vector v = state_values(f, pi);
  double total = 0.0;
  for (const auto& tr : ds.transitions) total += v(tr.s) - f.values(tr.s, tr.a);
  return {total / static_cast<double>(ds.size()), LossKind::kLEmpirical};
}

QFunction critic_table(const Network& net, const Matrix& table, int num_states, int num_actions) {
  if (table.cols() != static_cast<Eigen::Index>(num_states) * num_actions)
    throw InvalidInput("embedding table does not cover every state-action pair");
  const Matrix out = forward_batch(net, table);
  if (out.rows() != 1) throw InvalidInput("critic network must have scalar output");
  return QFunction::from_flat(out.row(0).transpose(), num_states, num_actions);
}

LossValue loss_empirical(const EmbeddedDataset& ds, const Policy& pi, const Network& f) {
  if (ds.states.empty()) throw InvalidInput("empty dataset");
  const QFunction q = critic_table(f, ds.table, ds.num_states, ds.num_actions);
  const Vector v = state_values(q, pi);
  double total = 0.0;
  for (std::size_t i = 0; i < ds.states.size(); ++i)
    total += v(ds.states[i]) - q.values(ds.states[i], ds.actions[i]);
  return {total / static_cast<double>(ds.states.size()), LossKind::kLEmpirical};
}

NetworkInnerResult empirical_bellman_error_network(const EmbeddedDataset& ds,
                                                   const TabularMDP& mdp, const Policy& pi,
                                                   const Network& f,
                                                   const NetworkInnerConfig& cfg) {
  if (ds.states.empty()) throw InvalidInput("empty dataset");
  const int S = mdp.num_states(), A = mdp.num_actions();
  const QFunction q = critic_table(f, ds.table, S, A);
  const Vector v = state_values(q, pi);
  const double gamma = mdp.gamma(), v_max = mdp.v_max();
  const auto n = static_cast<double>(ds.states.size());

  // The inner objective depends on f' only through its values on the S*A
  // embedded points: sum_sa p(s,a) (f'(z_sa) - ybar_sa)^2 + const.
  Vector weight = Vector::Zero(S * A), ybar = Vector::Zero(S * A);
  std::vector<double> ys(ds.states.size());
  for (std::size_t i = 0; i < ds.states.size(); ++i) {
    const int k = ds.states[i] * A + ds.actions[i];
    ys[i] = ds.rewards[i] + gamma * v(ds.next_states[i]);
    weight(k) += 1.0;
    ybar(k) += ys[i];
  }
  for (Eigen::Index k = 0; k < weight.size(); ++k)
    if (weight(k) > 0.0) ybar(k) /= weight(k);
  weight /= n;

  Network inner = Network::random(ds.ambient_dim, cfg.hidden, 1, cfg.seed);
  Vector params = inner.flat_params();
  for (int step = 0; step < cfg.steps; ++step) {
    const Matrix pred = forward_batch(inner, ds.table);
    Matrix grad_out(1, pred.cols());
    for (Eigen::Index k = 0; k < pred.cols(); ++k) grad_out(0, k) = 2.0 * weight(k) * (pred(0, k) - ybar(k));
    params -= cfg.learning_rate * backward(inner, ds.table, grad_out);
    inner.set_flat_params(params);
    if (!params.allFinite()) throw NumericalError("network inner minimization diverged");
  }
  const Matrix pred = forward_batch(inner, ds.table);

  NetworkInnerResult out;
  double first = 0.0, second = 0.0, tab = 0.0;
  int empty = 0;
  for (Eigen::Index k = 0; k < weight.size(); ++k) empty += weight(k) == 0.0;
  for (std::size_t i = 0; i < ds.states.size(); ++i) {
    const int k = ds.states[i] * A + ds.actions[i];
    const double e1 = q.values(ds.states[i], ds.actions[i]) - ys[i];
    const double e2 = std::clamp(pred(0, k), 0.0, v_max) - ys[i];
    const double e3 = std::clamp(ybar(k), 0.0, v_max) - ys[i];
    first += e1 * e1;
    second += e2 * e2;
    tab += e3 * e3;
  }
  out.error.kind = ErrorKind::kEmpirical;
  out.error.inner_min_residual = second / n;
  out.error.value = (first - second) / n;
  out.error.empty_cells = empty;
  out.error.negative = out.error.value < -kNegativeTolerance;
  out.tabular_inner_min = tab / n;
  out.gap = out.error.inner_min_residual - out.tabular_inner_min;
  return out;
}

// ---------------------------------------------------------------------------

int EmpiricalModel::empty_cells() const {
  int e = 0;
  for (Eigen::Index k = 0; k < count.size(); ++k) e += count(k) == 0.0;
  return e;
}

EmpiricalModel empirical_model(const Dataset& ds, int num_states, int num_actions) {
  if (ds.transitions.empty()) throw InvalidInput("empty dataset");
  EmpiricalModel m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  const int SA = num_states * num_actions;
  m.n = static_cast<double>(ds.size());
  m.count = Vector::Zero(SA);
  m.reward_mean = Vector::Zero(SA);
  m.next = Matrix::Zero(SA, num_states);
  for (const auto& tr : ds.transitions) {
    if (tr.s < 0 || tr.s >= num_states || tr.a < 0 || tr.a >= num_actions || tr.s_next < 0 ||
        tr.s_next >= num_states)
      throw InvalidInput("dataset index out of range");
    const int k = tr.s * num_actions + tr.a;
    m.count(k) += 1.0;
    m.reward_mean(k) += tr.r;
    m.next(k, tr.s_next) += 1.0;
  }
  for (int k = 0; k < SA; ++k) {
    if (m.count(k) == 0.0) continue;
    m.reward_mean(k) /= m.count(k);
    m.next.row(k) /= m.count(k);
  }
  m.weight = m.count / m.n;
  m.state_weight = Vector::Zero(num_states);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) m.state_weight(s) += m.weight(s * num_actions + a);
  return m;
}

Vector cell_targets(const EmpiricalModel& model, const Policy& pi, const QFunction& f, double gamma) {
  return model.reward_mean + gamma * model.next * state_values(f, pi);
}

double empirical_error(const EmpiricalModel& model, const Policy& pi, const QFunction& f,
                       double gamma, double v_max) {
  return empirical_error_gradient(model, pi, f, gamma, v_max).value;
}

ErrorGradient empirical_error_gradient(const EmpiricalModel& model, const Policy& pi,
                                       const QFunction& f, double gamma, double v_max) {
  const int S = model.num_states, A = model.num_actions;
  const Vector y = cell_targets(model, pi, f, gamma);
  const Vector fv = f.flat();
  ErrorGradient g;
  g.d_f = Matrix::Zero(S, A);
  g.d_pi = Matrix::Zero(S, A);
  Vector d_y = Vector::Zero(S * A);
  for (int k = 0; k < S * A; ++k) {
    const double w = model.weight(k);
    if (w == 0.0) continue;
    const double c = std::clamp(y(k), 0.0, v_max);
    const bool clipped = c != y(k);
    g.value += w * ((fv(k) - y(k)) * (fv(k) - y(k)) - (c - y(k)) * (c - y(k)));
    g.d_f(k / A, k % A) += 2.0 * w * (fv(k) - y(k));
    d_y(k) = -2.0 * w * (fv(k) - y(k)) + (clipped ? 2.0 * w * (c - y(k)) : 0.0);
  }
  // y = r + gamma P V, V(s') = sum_a' pi(a'|s') f(s',a').
  const Vector d_v = gamma * model.next.transpose() * d_y;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      g.d_f(s, a) += d_v(s) * pi(s, a);
      g.d_pi(s, a) = d_v(s) * f.values(s, a);
    }
  }
  return g;
}

double empirical_r(const EmpiricalModel& model, const Policy& pi, const QFunction& f) {
  const Vector v = state_values(f, pi);
  return model.weight.dot(f.flat()) - model.state_weight.dot(v);
}

ErrorGradient empirical_r_gradient(const EmpiricalModel& model, const Policy& pi,
                                   const QFunction& f) {
  const int S = model.num_states, A = model.num_actions;
  ErrorGradient g;
  g.value = empirical_r(model, pi, f);
  g.d_f = Matrix::Zero(S, A);
  g.d_pi = Matrix::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      g.d_f(s, a) = model.weight(s * A + a) - model.state_weight(s) * pi(s, a);
      g.d_pi(s, a) = -model.state_weight(s) * f.values(s, a);
    }
  }
  return g;
}

OccupancyDist empirical_measure(const EmpiricalModel& model) {
  OccupancyDist d;
  d.kind = OccupancyKind::kStationary;
  d.mass = Matrix::Zero(model.num_states, model.num_actions);
  for (int s = 0; s < model.num_states; ++s)
    for (int a = 0; a < model.num_actions; ++a) d.mass(s, a) = model.weight(s * model.num_actions + a);
  return d;
}

TabularMDP empirical_mdp(const EmpiricalModel& model, const TabularMDP& reference) {
  const int S = model.num_states, A = model.num_actions;
  if (reference.num_states() != S || reference.num_actions() != A)
    throw InvalidInput("empirical_mdp: reference shape mismatch");
  Matrix next = model.next;
  Matrix reward = Matrix::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int k = s * A + a;
      if (model.count(k) == 0.0) {
        next.row(k).setZero();
        next(k, s) = 1.0;
      } else {
        // Renormalize away the rounding of count division.
        next.row(k) /= next.row(k).sum();
        reward(s, a) = std::clamp(model.reward_mean(k), -reference.r_max(), reference.r_max());
      }
    }
  }
  return TabularMDP(S, A, next, reward, Matrix::Zero(S, A), reference.gamma(),
                    reference.initial_dist(), reference.r_max());
}

}  // namespace pessim
