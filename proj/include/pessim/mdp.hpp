#pragma once

#include "pessim/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <limits>
#include <string>

namespace pessim {

/// Size caps for dense oracles (all linear solves are direct factorizations).
inline constexpr int kMaxStates = 64;
inline constexpr int kMaxActions = 8;

/// Finite discounted MDP. State-action pairs are flattened as s * A + a.
///
/// Rewards are bounded noise around a mean: the realized reward is
/// mean + U[-w, w], clipped into [-r_max, r_max]. Validation requires
/// |mean| + w <= r_max so the clip is never active for valid documents.
class TabularMDP {
 public:
  /// transition: (S*A) x S, row (s,a) is P(.|s,a).
  /// reward_mean, reward_noise: S x A.
  TabularMDP(int num_states, int num_actions, Matrix transition, Matrix reward_mean,
             Matrix reward_noise, double gamma, Vector initial_dist, double r_max);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_pairs() const { return num_states_ * num_actions_; }
  int index(int s, int a) const { return s * num_actions_ + a; }

  const Matrix& transition() const { return transition_; }
  const Matrix& reward_mean() const { return reward_mean_; }
  const Matrix& reward_noise() const { return reward_noise_; }
  double gamma() const { return gamma_; }
  const Vector& initial_dist() const { return initial_dist_; }
  double r_max() const { return r_max_; }
  double v_max() const { return r_max_ / (1.0 - gamma_); }

  /// Mean reward flattened to a length S*A vector.
  Vector reward_vector() const;

  /// Copies with one field replaced (the copy is revalidated).
  TabularMDP with_gamma(double gamma) const;
  TabularMDP with_initial_dist(Vector initial_dist) const;

 private:
  int num_states_;
  int num_actions_;
  Matrix transition_;
  Matrix reward_mean_;
  Matrix reward_noise_;
  double gamma_;
  Vector initial_dist_;
  double r_max_;
};

/// Stochastic policy pi(a|s), stored S x A.
class Policy {
 public:
  explicit Policy(Matrix probs);

  static Policy uniform(int num_states, int num_actions);
  static Policy deterministic(int num_actions, const std::vector<int>& actions);

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  const Matrix& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }

 private:
  Matrix probs_;
};

/// Action-value table Q(s,a), stored S x A.
struct QFunction {
  Matrix values;

  static QFunction zeros(int num_states, int num_actions) {
    return {Matrix::Zero(num_states, num_actions)};
  }
  static QFunction constant(int num_states, int num_actions, double c) {
    return {Matrix::Constant(num_states, num_actions, c)};
  }
  /// Row-major flattening consistent with TabularMDP::index.
  Vector flat() const;
  static QFunction from_flat(const Vector& v, int num_states, int num_actions);
};

enum class OccupancyKind { kDiscounted, kStationary };

std::string to_string(OccupancyKind kind);

/// Probability table over (s,a), stored S x A.
struct OccupancyDist {
  Matrix mass;
  OccupancyKind kind = OccupancyKind::kDiscounted;

  Vector flat() const;
  /// State marginal sum_a mass(s, a).
  Vector state_marginal() const { return mass.rowwise().sum(); }
};

/// Concentrability coefficient. When the behaviour measure misses mass of the
/// comparator, `finite` is false and `value` is +infinity.
struct Concentrability {
  double value = 1.0;
  bool finite = true;
};

// ---------------------------------------------------------------------------
// Exact operators

/// Policy-weighted next-pair kernel P^pi: (S*A) x (S*A),
/// P^pi[(s,a),(s',a')] = P(s'|s,a) pi(a'|s').
Matrix pair_transition(const TabularMDP& mdp, const Policy& pi);

/// f(s, pi) = sum_a pi(a|s) f(s,a), one entry per state.
Vector state_values(const QFunction& f, const Policy& pi);

/// (T^pi q)(s,a) = E[R(s,a)] + gamma sum_{s'} P(s'|s,a) sum_{a'} pi(a'|s') q(s',a').
QFunction bellman_apply(const TabularMDP& mdp, const Policy& pi, const QFunction& q);

/// Q^pi from (I - gamma P^pi) Q = r by LU; throws NumericalError when the
/// fixed-point residual exceeds 1e-10 (times the value scale).
QFunction q_fixed_point(const TabularMDP& mdp, const Policy& pi);

/// J(pi) = sum_s initial(s) sum_a pi(a|s) Q^pi(s,a).
double value_of_policy(const TabularMDP& mdp, const Policy& pi);

/// (1-gamma) sum_t gamma^t Pr(s_t=s, a_t=a) from the MDP's initial distribution.
OccupancyDist discounted_occupancy(const TabularMDP& mdp, const Policy& pi);

/// Stationary distribution of the (s,a)-chain. Throws InvalidInput if the
/// chain is not ergodic.
OccupancyDist stationary_occupancy(const TabularMDP& mdp, const Policy& pi);

OccupancyDist occupancy(const TabularMDP& mdp, const Policy& pi, OccupancyKind kind);

/// Stationary row vector of an ergodic kernel: x^T (I - K) = 0, sum x = 1.
Vector stationary_distribution(const Matrix& kernel);

/// max_{(s,a)} rho^pi(s,a) / rho^mu(s,a) for the selected occupancy kind.
Concentrability concentrability(const TabularMDP& mdp, const Policy& pi, const Policy& mu,
                                OccupancyKind kind);

/// Ratio form on two precomputed measures.
Concentrability concentrability(const OccupancyDist& target, const OccupancyDist& behavior);

/// |(J(mu) - J(pi)) - E_{d^mu}[Q^pi(s,a) - Q^pi(s,pi)] / (1-gamma)|.
double performance_difference_residual(const TabularMDP& mdp, const Policy& mu,
                                       const Policy& pi);

/// |(E_{s0}[f(s0,pi')] - J(pi)) - E_{d^pi}[f(s,pi') - T^{pi'} f(s,a)] / (1-gamma)|.
double general_pd_residual(const TabularMDP& mdp, const Policy& pi, const Policy& pi_prime,
                           const QFunction& f);

// ---------------------------------------------------------------------------
// Chain structure

struct ChainStructure {
  int closed_classes = 0;
  int period = 0;  // period of the closed class (0 when closed_classes != 1)
  bool ergodic() const { return closed_classes == 1 && period == 1; }
};

/// Communicating-class analysis of a row-stochastic matrix on its support.
ChainStructure analyze_chain(const Matrix& kernel, double support_tol = 0.0);

// ---------------------------------------------------------------------------
// Generators and serialization

struct RandomMdpOptions {
  int num_states = 4;
  int num_actions = 2;
  double gamma = 0.9;
  double r_max = 1.0;
  /// Fraction of r_max used as the reward noise half-width.
  double noise_fraction = 0.1;
  /// Dirichlet-style concentration; small values give peaked rows.
  double transition_concentration = 1.0;
};

/// Random MDP with reward means in [w, r_max - w] (so realized rewards and all
/// Q-values lie in [0, r_max] and [0, v_max]) and full-support transitions.
TabularMDP random_mdp(const RandomMdpOptions& options, Rng& rng);

/// Random policy; `min_prob` keeps every entry at least that large.
Policy random_policy(int num_states, int num_actions, Rng& rng, double min_prob = 0.0);

/// Random Q-table with entries uniform on [lo, hi].
QFunction random_q(int num_states, int num_actions, Rng& rng, double lo, double hi);

/// Replaces the initial distribution by the stationary state marginal of mu,
/// which makes the discounted occupancy of mu equal its stationary occupancy.
TabularMDP with_stationary_initial(const TabularMDP& mdp, const Policy& mu);

nlohmann::json to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Policy& pi);
Policy policy_from_json(const nlohmann::json& doc);

}  // namespace pessim
