#pragma once

#include "pessim/bellman.hpp"
#include "pessim/mdp.hpp"
#include "pessim/network.hpp"
#include "pessim/trajectory.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pessim {

// ---------------------------------------------------------------------------
// Population inner maximization
//
//   max_f  c.f   s.t.  ||(I - gamma P^pi) f - r||^2_rho <= eps,  lo <= f <= v_max
//
// with c(s,a) = rho(s,a) - rho(s) pi(a|s), so c.f = R_rho(pi, f).

struct QclpOptions {
  enum class Method { kAuto, kProjectedGradient, kClosedForm };
  /// kAuto returns the closed-form maximizer when it lies in the box (it is
  /// then optimal for the boxed problem too) and runs projected gradient
  /// otherwise.
  Method method = Method::kAuto;
  int starts = 8;
  int max_iterations = 20000;
  double tolerance = 1e-14;
  std::uint64_t seed = 0x5eed;
};

struct InnerMaxResult {
  double value = 0.0;
  QFunction witness;
  /// ||A f - r||^2_rho at the witness.
  double constraint_value = 0.0;
  /// The unboxed closed-form maximizer leaves the box.
  bool box_active = false;
  bool used_closed_form = false;
  /// rho has zero cells; those rows are unconstrained except by the box.
  bool restricted_support = false;
  /// Q^pi left [0, v_max], so the lower bound was widened to -v_max.
  bool widened_box = false;
  int iterations = 0;
};

/// c(s,a) = rho(s,a) - rho(s) pi(a|s), flattened.
Vector signed_occupancy(const OccupancyDist& measure, const Policy& pi);

struct ClosedFormSolution {
  double value = 0.0;
  QFunction witness;
  bool in_box = false;
};

/// Maximizer of c.f over the ellipsoid alone. Needs rho > 0 everywhere:
/// with u = A^{-T} c the witness is A^{-1}(r + sqrt(eps) D^{-1} u / |u|_{D^{-1}})
/// and the value c.Q^pi + sqrt(eps u' D^{-1} u).
ClosedFormSolution inner_max_closed_form(const TabularMDP& mdp, const OccupancyDist& measure,
                                         const Policy& pi, double epsilon, double v_max);

InnerMaxResult inner_max_population_oracle(const TabularMDP& mdp, const OccupancyDist& measure,
                                           const Policy& pi, double epsilon, double v_max,
                                           const QclpOptions& opts = {});

/// rho = d^mu.
InnerMaxResult inner_max_population_oracle(const TabularMDP& mdp, const Policy& mu,
                                           const Policy& pi, double epsilon, double v_max,
                                           const QclpOptions& opts = {});

// ---------------------------------------------------------------------------
// Empirical adversarial solver

enum class PenaltyKind { kHinge, kQuadratic, kAugmentedLagrangian };
enum class CriticKind { kTabular, kNetwork };
enum class PolicyParam { kTabularSoftmax, kNetworkDensity };

std::string to_string(PenaltyKind k);
std::string to_string(CriticKind k);
std::string to_string(PolicyParam k);
PenaltyKind parse_penalty(const std::string& s);
CriticKind parse_critic(const std::string& s);
PolicyParam parse_policy_param(const std::string& s);

struct SolverConfig {
  double epsilon = 0.05;
  double lagrange_beta = 50.0;
  int outer_steps = 400;
  int inner_steps = 25;
  double critic_step = 1.0;
  double policy_step = 1.0;
  /// 0 means r_max / (1 - gamma) of the MDP.
  double v_max = 0.0;
  std::uint64_t seed = 0;
  PolicyParam policy_parameterization = PolicyParam::kTabularSoftmax;
  CriticKind critic = CriticKind::kTabular;
  PenaltyKind penalty = PenaltyKind::kAugmentedLagrangian;
  std::vector<int> critic_hidden = {32, 32};
  std::vector<int> policy_hidden = {16};
  EmbedSpec embed{EmbedSpec::Kind::kGrid, 2};

  void validate() const;
};

nlohmann::json to_json(const SolverConfig& cfg);

/// Critic over state-action pairs: a clipped table, or a network read on the
/// embedding table (outputs clipped to [0, v_max]).
class Critic {
 public:
  static Critic tabular(const QFunction& init, double v_max);
  static Critic network(Network net, Matrix table, int num_states, int num_actions, double v_max);

  QFunction values() const;
  /// Ascent step along a gradient given with respect to the S x A values.
  void ascend(const Matrix& grad, double step);
  bool is_network() const { return kind_ == CriticKind::kNetwork; }
  const Network& net() const { return net_; }
  /// Replaces the values by regression onto `target` (network: fixed budget).
  void fit(const QFunction& target, int steps, double learning_rate);

 private:
  CriticKind kind_ = CriticKind::kTabular;
  QFunction table_;
  Network net_;
  Matrix embed_;
  int num_states_ = 0;
  int num_actions_ = 0;
  double v_max_ = 0.0;
};

/// Penalized inner objective state: the multiplier persists across calls
/// for the augmented Lagrangian.
struct PenaltyState {
  double multiplier = 0.0;
};

struct AdversarialResult {
  /// R_D(pi, f) at the final critic.
  double value = 0.0;
  double bellman_error = 0.0;
  /// E_D - eps.
  double slack = 0.0;
  /// slack > 10 eps (or > 1e-6 when eps = 0).
  bool constraint_failure = false;
  double multiplier = 0.0;
  Critic critic;
};

/// Weight on grad E_D in the ascent direction (and in the Danskin policy
/// gradient) for the current constraint violation g = E_D - eps.
double penalty_weight(PenaltyKind kind, double beta, double multiplier, double g);

/// Gradient ascent on R_D(pi,f) - beta * penalty(E_D(pi,f) - eps) for
/// cfg.inner_steps steps, starting from `critic`. The augmented Lagrangian
/// updates its multiplier every `multiplier_period` steps.
AdversarialResult inner_max_adversarial(const EmpiricalModel& model, const TabularMDP& mdp,
                                        const Policy& pi, Critic critic, const SolverConfig& cfg,
                                        PenaltyState* penalty = nullptr,
                                        int multiplier_period = 25);

/// Initial critic: the empirical Q^pi (feasible, E_D = 0) as a table or a
/// network fitted to it.
Critic initial_critic(const EmpiricalModel& model, const TabularMDP& mdp, const Policy& pi,
                      const SolverConfig& cfg);

struct TraceRow {
  int iteration = 0;
  double r_d = 0.0;
  double slack = 0.0;
  double lagrange_value = 0.0;
  double entropy = 0.0;
};

struct SolveResult {
  Policy policy_hat = Policy::uniform(1, 1);
  QFunction critic_hat;
  std::optional<Network> critic_net;
  std::optional<Network> policy_net;
  std::vector<TraceRow> trace;
  bool converged = false;
  double final_slack = 0.0;
  bool constraint_failure = false;
};

/// Alternating scheme: inner adversarial critic steps, then a policy step
/// decreasing the penalized objective at the current critic (its gradient
/// includes the penalty's dependence on pi). Deterministic given cfg.seed.
/// The MDP supplies gamma, r_max and the state/action sizes only.
SolveResult solve_empirical_minimax(const Dataset& ds, const TabularMDP& mdp, const SolverConfig& cfg);

/// Trace as CSV: iteration,r_d,slack,lagrange_value,entropy.
std::string trace_csv(const SolveResult& result);

/// Mean per-state entropy of a policy (natural log).
double policy_entropy(const Policy& pi);

// ---------------------------------------------------------------------------
// Oracle policy and excess risk

struct OraclePolicyOptions {
  enum class Mode { kAuto, kGrid, kMultiStart };
  Mode mode = Mode::kAuto;
  double resolution = 0.05;
  /// Local projected-gradient polish after the grid search.
  bool refine = true;
  int starts = 8;
  int iterations = 300;
  std::uint64_t seed = 0x07ac1e;
  QclpOptions qclp;
};

struct OraclePolicy {
  Policy policy = Policy::uniform(1, 1);
  double value = 0.0;
  std::size_t evaluations = 0;
  bool used_grid = false;
};

/// Number of grid policies for the given sizes and resolution.
double policy_grid_size(int num_states, int num_actions, double resolution);

/// argmin over policies of the population inner maximum, by exhaustive grid
/// search (|S||A| <= 16) or multi-start projected gradient.
OraclePolicy oracle_policy_solve(const TabularMDP& mdp, const OccupancyDist& measure,
                                 double epsilon, double v_max,
                                 const OraclePolicyOptions& opts = {});

struct ExcessRisk {
  double value = 0.0;
  double reported = 0.0;  // max(value, 0)
  bool negative = false;  // value < 0 (oracle resolution)
  double r_hat = 0.0;
  double r_star = 0.0;
};

ExcessRisk excess_risk(const TabularMDP& mdp, const OccupancyDist& measure, const Policy& pi_hat,
                       const OraclePolicy& oracle, double epsilon, double v_max,
                       const QclpOptions& qclp = {});

/// Optimal policy by exact policy iteration (test oracle).
Policy optimal_policy(const TabularMDP& mdp);

/// Projects each row onto the probability simplex.
Matrix project_rows_to_simplex(const Matrix& m);

}  // namespace pessim
