#include "pessim/mdp.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace pessim {

namespace {

constexpr double kRowTol = 1e-12;

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// ---------------------------------------------------------------------------

TabularMDP::TabularMDP(int num_states, int num_actions, Matrix transition, Matrix reward_mean,
                       Matrix reward_noise, double gamma, Vector initial_dist, double r_max)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      reward_mean_(std::move(reward_mean)),
      reward_noise_(std::move(reward_noise)),
      gamma_(gamma),
      initial_dist_(std::move(initial_dist)),
      r_max_(r_max) {
  require(num_states_ >= 1 && num_actions_ >= 1, "MDP needs at least one state and action");
  require(num_states_ <= kMaxStates && num_actions_ <= kMaxActions,
          "MDP exceeds the dense-oracle cap of 64 states x 8 actions");
  const int sa = num_states_ * num_actions_;
  require(transition_.rows() == sa && transition_.cols() == num_states_,
          "transition must be (S*A) x S");
  require(reward_mean_.rows() == num_states_ && reward_mean_.cols() == num_actions_,
          "reward_mean must be S x A");
  require(reward_noise_.rows() == num_states_ && reward_noise_.cols() == num_actions_,
          "reward_noise must be S x A");
  require(initial_dist_.size() == num_states_, "initial_dist must have S entries");
  require(gamma_ > 0.0 && gamma_ < 1.0, "gamma must lie in (0, 1)");
  require(r_max_ > 0.0 && std::isfinite(r_max_), "r_max must be positive");
  require(all_finite(transition_) && all_finite(reward_mean_) && all_finite(reward_noise_) &&
              initial_dist_.allFinite(),
          "MDP tables must be finite");
  require((transition_.array() >= 0.0).all(), "transition probabilities must be nonnegative");
  for (int r = 0; r < sa; ++r) {
    const double row = transition_.row(r).sum();
    if (std::abs(row - 1.0) > kRowTol) {
      std::ostringstream msg;
      msg << "transition row " << r << " sums to " << row << ", expected 1";
      throw InvalidInput(msg.str());
    }
  }
  require((initial_dist_.array() >= 0.0).all() && std::abs(initial_dist_.sum() - 1.0) <= kRowTol,
          "initial_dist must be a probability vector");
  require((reward_noise_.array() >= 0.0).all(), "reward noise half-widths must be nonnegative");
  require(((reward_mean_.array().abs() + reward_noise_.array()) <= r_max_ * (1.0 + 1e-12)).all(),
          "|reward_mean| + noise half-width must not exceed r_max");
}

Vector TabularMDP::reward_vector() const {
  Vector r(num_pairs());
  for (int s = 0; s < num_states_; ++s)
    for (int a = 0; a < num_actions_; ++a) r(index(s, a)) = reward_mean_(s, a);
  return r;
}

TabularMDP TabularMDP::with_gamma(double gamma) const {
  return TabularMDP(num_states_, num_actions_, transition_, reward_mean_, reward_noise_, gamma,
                    initial_dist_, r_max_);
}

TabularMDP TabularMDP::with_initial_dist(Vector initial_dist) const {
  return TabularMDP(num_states_, num_actions_, transition_, reward_mean_, reward_noise_, gamma_,
                    std::move(initial_dist), r_max_);
}

Policy::Policy(Matrix probs) : probs_(std::move(probs)) {
  require(probs_.rows() >= 1 && probs_.cols() >= 1, "policy table must be nonempty");
  require(probs_.allFinite() && (probs_.array() >= 0.0).all(),
          "policy probabilities must be finite and nonnegative");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (std::abs(probs_.row(s).sum() - 1.0) > kRowTol) {
      std::ostringstream msg;
      msg << "policy row " << s << " sums to " << probs_.row(s).sum();
      throw InvalidInput(msg.str());
    }
  }
}

Policy Policy::uniform(int num_states, int num_actions) {
  return Policy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
}

Policy Policy::deterministic(int num_actions, const std::vector<int>& actions) {
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    require(actions[s] >= 0 && actions[s] < num_actions, "action index out of range");
    p(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return Policy(std::move(p));
}

Vector QFunction::flat() const {
  Vector v(values.size());
  for (Eigen::Index s = 0; s < values.rows(); ++s)
    for (Eigen::Index a = 0; a < values.cols(); ++a) v(s * values.cols() + a) = values(s, a);
  return v;
}

QFunction QFunction::from_flat(const Vector& v, int num_states, int num_actions) {
  require(v.size() == num_states * num_actions, "flat Q vector has wrong length");
  Matrix m(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) m(s, a) = v(s * num_actions + a);
  return {std::move(m)};
}

std::string to_string(OccupancyKind kind) {
  return kind == OccupancyKind::kDiscounted ? "discounted-occupancy" : "stationary";
}

Vector OccupancyDist::flat() const { return QFunction{mass}.flat(); }

// ---------------------------------------------------------------------------

namespace {

void check_shapes(const TabularMDP& mdp, const Policy& pi) {
  if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions())
    throw InvalidInput("policy shape does not match the MDP");
}

void check_shapes(const TabularMDP& mdp, const QFunction& q) {
  if (q.values.rows() != mdp.num_states() || q.values.cols() != mdp.num_actions())
    throw InvalidInput("Q-function shape does not match the MDP");
}

/// Initial pair distribution nu0(s) pi(a|s), flattened.
Vector initial_pairs(const TabularMDP& mdp, const Policy& pi) {
  Vector d0(mdp.num_pairs());
  for (int s = 0; s < mdp.num_states(); ++s)
    for (int a = 0; a < mdp.num_actions(); ++a)
      d0(mdp.index(s, a)) = mdp.initial_dist()(s) * pi(s, a);
  return d0;
}

}  // namespace

Matrix pair_transition(const TabularMDP& mdp, const Policy& pi) {
  check_shapes(mdp, pi);
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  Matrix k(mdp.num_pairs(), mdp.num_pairs());
  for (int row = 0; row < mdp.num_pairs(); ++row)
    for (int s2 = 0; s2 < S; ++s2)
      for (int a2 = 0; a2 < A; ++a2) k(row, s2 * A + a2) = mdp.transition()(row, s2) * pi(s2, a2);
  return k;
}

Vector state_values(const QFunction& f, const Policy& pi) {
  if (f.values.rows() != pi.num_states() || f.values.cols() != pi.num_actions())
    throw InvalidInput("Q-function and policy shapes differ");
  return f.values.cwiseProduct(pi.probs()).rowwise().sum();
}

QFunction bellman_apply(const TabularMDP& mdp, const Policy& pi, const QFunction& q) {
  check_shapes(mdp, pi);
  check_shapes(mdp, q);
  const Vector next = mdp.transition() * state_values(q, pi);
  const Vector out = mdp.reward_vector() + mdp.gamma() * next;
  return QFunction::from_flat(out, mdp.num_states(), mdp.num_actions());
}

QFunction q_fixed_point(const TabularMDP& mdp, const Policy& pi) {
  const Matrix system =
      Matrix::Identity(mdp.num_pairs(), mdp.num_pairs()) - mdp.gamma() * pair_transition(mdp, pi);
  const Vector q = system.partialPivLu().solve(mdp.reward_vector());
  QFunction out = QFunction::from_flat(q, mdp.num_states(), mdp.num_actions());
  const double residual = (bellman_apply(mdp, pi, out).values - out.values).cwiseAbs().maxCoeff();
  if (!(residual < 1e-10 * std::max(1.0, mdp.v_max())))
    throw NumericalError("fixed-point solve left residual " + std::to_string(residual));
  return out;
}

double value_of_policy(const TabularMDP& mdp, const Policy& pi) {
  const Vector v = state_values(q_fixed_point(mdp, pi), pi);
  return mdp.initial_dist().dot(v);
}

OccupancyDist discounted_occupancy(const TabularMDP& mdp, const Policy& pi) {
  const int n = mdp.num_pairs();
  const Matrix system =
      Matrix::Identity(n, n) - mdp.gamma() * pair_transition(mdp, pi).transpose();
  Vector d = (1.0 - mdp.gamma()) * system.partialPivLu().solve(initial_pairs(mdp, pi));
  d = d.cwiseMax(0.0);
  d /= d.sum();
  return {QFunction::from_flat(d, mdp.num_states(), mdp.num_actions()).values,
          OccupancyKind::kDiscounted};
}

Vector stationary_distribution(const Matrix& kernel) {
  const Eigen::Index n = kernel.rows();
  Matrix system = (Matrix::Identity(n, n) - kernel).transpose();
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Vector x = system.fullPivLu().solve(rhs);
  x = x.cwiseMax(0.0);
  return x / x.sum();
}

OccupancyDist stationary_occupancy(const TabularMDP& mdp, const Policy& pi) {
  const Matrix kernel = pair_transition(mdp, pi);
  if (!analyze_chain(kernel).ergodic())
    throw InvalidInput("state-action chain is not ergodic; stationary occupancy undefined");
  const Vector x = stationary_distribution(kernel);
  return {QFunction::from_flat(x, mdp.num_states(), mdp.num_actions()).values,
          OccupancyKind::kStationary};
}

OccupancyDist occupancy(const TabularMDP& mdp, const Policy& pi, OccupancyKind kind) {
  return kind == OccupancyKind::kDiscounted ? discounted_occupancy(mdp, pi)
                                            : stationary_occupancy(mdp, pi);
}

Concentrability concentrability(const OccupancyDist& target, const OccupancyDist& behavior) {
  if (target.mass.rows() != behavior.mass.rows() || target.mass.cols() != behavior.mass.cols())
    throw InvalidInput("occupancy shapes differ");
  Concentrability out{0.0, true};
  for (Eigen::Index i = 0; i < target.mass.size(); ++i) {
    const double p = target.mass.data()[i];
    const double q = behavior.mass.data()[i];
    if (p <= 0.0) continue;
    if (q <= 0.0) return {std::numeric_limits<double>::infinity(), false};
    out.value = std::max(out.value, p / q);
  }
  return out;
}

Concentrability concentrability(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                                OccupancyKind kind) {
  return concentrability(occupancy(mdp, pi, kind), occupancy(mdp, mu, kind));
}

double performance_difference_residual(const TabularMDP& mdp, const Policy& mu,
                                       const Policy& pi) {
  const QFunction q_pi = q_fixed_point(mdp, pi);
  const Vector v_pi = state_values(q_pi, pi);
  const OccupancyDist d_mu = discounted_occupancy(mdp, mu);
  double advantage = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s)
    for (int a = 0; a < mdp.num_actions(); ++a)
      advantage += d_mu.mass(s, a) * (q_pi.values(s, a) - v_pi(s));
  const double lhs = value_of_policy(mdp, mu) - mdp.initial_dist().dot(v_pi);
  return std::abs(lhs - advantage / (1.0 - mdp.gamma()));
}

double general_pd_residual(const TabularMDP& mdp, const Policy& pi, const Policy& pi_prime,
                           const QFunction& f) {
  check_shapes(mdp, f);
  const Vector f_next = state_values(f, pi_prime);
  const QFunction tf = bellman_apply(mdp, pi_prime, f);
  const OccupancyDist d_pi = discounted_occupancy(mdp, pi);
  double rhs = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s)
    for (int a = 0; a < mdp.num_actions(); ++a)
      rhs += d_pi.mass(s, a) * (f_next(s) - tf.values(s, a));
  const double lhs = mdp.initial_dist().dot(f_next) - value_of_policy(mdp, pi);
  return std::abs(lhs - rhs / (1.0 - mdp.gamma()));
}

// ---------------------------------------------------------------------------

ChainStructure analyze_chain(const Matrix& kernel, double support_tol) {
  const int n = static_cast<int>(kernel.rows());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (kernel(i, j) > support_tol) adj[i].push_back(j);

  // reach[i][j]: j reachable from i (n <= 512, a BFS per node is fine).
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i) {
    std::queue<int> q;
    q.push(i);
    reach[i][i] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (!reach[i][v]) {
          reach[i][v] = 1;
          q.push(v);
        }
    }
  }

  ChainStructure out;
  std::vector<char> assigned(n, 0);
  std::vector<int> closed_members;
  for (int i = 0; i < n; ++i) {
    if (assigned[i]) continue;
    std::vector<int> cls;
    for (int j = 0; j < n; ++j)
      if (reach[i][j] && reach[j][i]) cls.push_back(j);
    for (int j : cls) assigned[j] = 1;
    bool closed = true;
    for (int u : cls)
      for (int v : adj[u])
        if (!(reach[v][u])) closed = false;
    if (closed) {
      ++out.closed_classes;
      closed_members = cls;
    }
  }
  if (out.closed_classes != 1) return out;

  // Period: gcd over edges inside the class of (level(u) + 1 - level(v)).
  std::vector<int> level(n, -1);
  std::queue<int> q;
  level[closed_members.front()] = 0;
  q.push(closed_members.front());
  int g = 0;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        q.push(v);
      } else {
        g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
      }
    }
  }
  out.period = g == 0 ? 1 : g;
  return out;
}

// ---------------------------------------------------------------------------

TabularMDP random_mdp(const RandomMdpOptions& o, Rng& rng) {
  const int S = o.num_states;
  const int A = o.num_actions;
  Matrix transition(S * A, S);
  for (int row = 0; row < S * A; ++row) {
    for (int s2 = 0; s2 < S; ++s2) {
      // Gamma(concentration) draws via -log(U)^(1/concentration) are not exact
      // Dirichlet but give the intended range from peaked to flat rows.
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      transition(row, s2) = std::pow(-std::log(u), 1.0 / o.transition_concentration) + 1e-3;
    }
    transition.row(row) /= transition.row(row).sum();
  }
  const double w = o.noise_fraction * o.r_max * 0.5;
  Matrix mean(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) mean(s, a) = rng.uniform(w, o.r_max - w);
  Matrix noise = Matrix::Constant(S, A, w);
  Vector init(S);
  for (int s = 0; s < S; ++s) init(s) = rng.uniform(0.2, 1.0);
  init /= init.sum();
  return TabularMDP(S, A, std::move(transition), std::move(mean), std::move(noise), o.gamma,
                    std::move(init), o.r_max);
}

Policy random_policy(int num_states, int num_actions, Rng& rng, double min_prob) {
  Matrix p(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) p(s, a) = rng.uniform(0.0, 1.0);
    p.row(s) /= p.row(s).sum();
    if (min_prob > 0.0) {
      p.row(s) = (p.row(s).array() * (1.0 - min_prob * num_actions) + min_prob).matrix();
    }
    p.row(s) /= p.row(s).sum();
  }
  return Policy(std::move(p));
}

QFunction random_q(int num_states, int num_actions, Rng& rng, double lo, double hi) {
  Matrix m(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) m(s, a) = rng.uniform(lo, hi);
  return {std::move(m)};
}

TabularMDP with_stationary_initial(const TabularMDP& mdp, const Policy& mu) {
  Vector marginal = stationary_occupancy(mdp, mu).state_marginal();
  marginal /= marginal.sum();
  return mdp.with_initial_dist(std::move(marginal));
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& rows, const std::string& field) {
  if (!rows.is_array() || rows.empty() || !rows.front().is_array())
    throw InvalidInput("field '" + field + "' must be a nonempty array of arrays");
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.front().size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
      throw InvalidInput("field '" + field + "' has ragged rows");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const TabularMDP& mdp) {
  nlohmann::json doc;
  doc["num_states"] = mdp.num_states();
  doc["num_actions"] = mdp.num_actions();
  doc["gamma"] = mdp.gamma();
  doc["r_max"] = mdp.r_max();
  doc["transition"] = matrix_json(mdp.transition());
  doc["reward_mean"] = matrix_json(mdp.reward_mean());
  doc["reward_noise"] = matrix_json(mdp.reward_noise());
  doc["initial_dist"] = std::vector<double>(mdp.initial_dist().data(),
                                            mdp.initial_dist().data() + mdp.initial_dist().size());
  return doc;
}

TabularMDP mdp_from_json(const nlohmann::json& doc) {
  try {
    const int S = doc.at("num_states").get<int>();
    const int A = doc.at("num_actions").get<int>();
    const auto init = doc.at("initial_dist").get<std::vector<double>>();
    Vector initial = Eigen::Map<const Vector>(init.data(), static_cast<Eigen::Index>(init.size()));
    return TabularMDP(S, A, matrix_from_json(doc.at("transition"), "transition"),
                      matrix_from_json(doc.at("reward_mean"), "reward_mean"),
                      matrix_from_json(doc.at("reward_noise"), "reward_noise"),
                      doc.at("gamma").get<double>(), std::move(initial),
                      doc.at("r_max").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed MDP document: ") + e.what());
  }
}

nlohmann::json to_json(const Policy& pi) {
  nlohmann::json doc;
  doc["probs"] = matrix_json(pi.probs());
  return doc;
}

Policy policy_from_json(const nlohmann::json& doc) {
  try {
    return Policy(matrix_from_json(doc.at("probs"), "probs"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed policy document: ") + e.what());
  }
}

}  // namespace pessim
