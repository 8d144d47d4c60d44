#pragma once

#include "pessim/mdp.hpp"
#include "pessim/network.hpp"
#include "pessim/trajectory.hpp"

#include <cstddef>
#include <string>

namespace pessim {

enum class LossKind { kLPopulation, kLEmpirical, kRPopulation, kREmpirical };
std::string to_string(LossKind kind);

struct LossValue {
  double value = 0.0;
  LossKind kind = LossKind::kLPopulation;

  /// The matching R (or L) value: R = -L.
  LossValue negated() const;
};

enum class ErrorKind { kPopulation, kEmpirical };

struct BellmanErrorValue {
  double value = 0.0;
  ErrorKind kind = ErrorKind::kPopulation;
  /// Empirical only: the inner-minimum squared regression term.
  double inner_min_residual = 0.0;
  /// Empirical only: state-action cells without data.
  int empty_cells = 0;
  /// Empirical only: value fell below -1e-6.
  bool negative = false;
};

inline constexpr double kNegativeTolerance = 1e-6;

// ---------------------------------------------------------------------------
// Population quantities (exact)

/// sum_{(s,a)} rho(s,a) (f - T^pi f)^2(s,a) under the given measure.
BellmanErrorValue population_bellman_error(const TabularMDP& mdp, const OccupancyDist& measure,
                                           const Policy& pi, const QFunction& f);

/// Same with rho = d^mu, the discounted occupancy of mu.
BellmanErrorValue population_bellman_error(const TabularMDP& mdp, const Policy& mu,
                                           const Policy& pi, const QFunction& f);

/// E_rho[f(s,pi) - f(s,a)].
LossValue loss_population(const OccupancyDist& measure, const Policy& pi, const QFunction& f);
LossValue loss_population(const TabularMDP& mdp, const Policy& mu, const Policy& pi,
                          const QFunction& f);

// ---------------------------------------------------------------------------
// Empirical quantities

enum class InnerClass { kTabular, kNetwork };

/// E_D(pi,f) = mean (f(s,a) - r - gamma f(s',pi))^2
///           - min_{f'} mean (f'(s,a) - r - gamma f(s',pi))^2.
/// The tabular inner class takes f' per cell as the clipped cell mean of the
/// targets, clipped to [0, v_max]; empty cells contribute nothing.
BellmanErrorValue empirical_bellman_error(const Dataset& ds, const TabularMDP& mdp,
                                          const Policy& pi, const QFunction& f);

/// E_D[f(s,pi) - f(s,a)].
LossValue loss_empirical(const Dataset& ds, const Policy& pi, const QFunction& f);

/// Network critic evaluated on an embedding table: the S x A values f(z(s,a)).
QFunction critic_table(const Network& net, const Matrix& table, int num_states, int num_actions);

/// Network-backed f with f(s,pi) = sum_a pi(a|s) f(z(s,a)).
LossValue loss_empirical(const EmbeddedDataset& ds, const Policy& pi, const Network& f);

struct NetworkInnerConfig {
  std::vector<int> hidden = {16, 16};
  int steps = 3000;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct NetworkInnerResult {
  BellmanErrorValue error;
  /// Tabular closed-form inner minimum on the same data (the oracle).
  double tabular_inner_min = 0.0;
  /// inner_min_residual - tabular_inner_min, >= 0 up to rounding.
  double gap = 0.0;
};

/// E_D for a network critic with the inner minimum taken over a ReLU network
/// class (outputs clipped to [0, v_max]) by a fixed-budget gradient loop.
NetworkInnerResult empirical_bellman_error_network(const EmbeddedDataset& ds,
                                                   const TabularMDP& mdp, const Policy& pi,
                                                   const Network& f,
                                                   const NetworkInnerConfig& cfg = {});

// ---------------------------------------------------------------------------
// Sufficient statistics

/// The dataset summarized per cell. Every empirical quantity above is a
/// function of these: weight p(s,a) = count / n, mean reward and the empirical
/// next-state law.
struct EmpiricalModel {
  int num_states = 0;
  int num_actions = 0;
  double n = 0.0;
  Vector count;         // S*A
  Vector weight;        // S*A
  Vector state_weight;  // S
  Vector reward_mean;   // S*A, 0 on empty cells
  Matrix next;          // (S*A) x S, zero rows on empty cells

  int empty_cells() const;
};

EmpiricalModel empirical_model(const Dataset& ds, int num_states, int num_actions);

/// Targets r(s,a) + gamma P(.|s,a) f(.,pi) per cell.
Vector cell_targets(const EmpiricalModel& model, const Policy& pi, const QFunction& f, double gamma);

/// E_D from the sufficient statistics,
/// sum_sa p(s,a) [(f - ybar)^2 - (clip(ybar) - ybar)^2].
double empirical_error(const EmpiricalModel& model, const Policy& pi, const QFunction& f,
                       double gamma, double v_max);

/// R_D(pi,f) = E_D[f(s,a) - f(s,pi)] from the sufficient statistics.
double empirical_r(const EmpiricalModel& model, const Policy& pi, const QFunction& f);

struct ErrorGradient {
  double value = 0.0;
  Matrix d_f;   // S x A
  Matrix d_pi;  // S x A
};

/// E_D and its gradients with respect to the table f and the policy table.
ErrorGradient empirical_error_gradient(const EmpiricalModel& model, const Policy& pi,
                                       const QFunction& f, double gamma, double v_max);

/// R_D and its gradients (d/df = p(s,a) - p(s) pi(a|s), d/dpi = -p(s) f).
ErrorGradient empirical_r_gradient(const EmpiricalModel& model, const Policy& pi,
                                   const QFunction& f);

/// The empirical measure p(s,a) as an occupancy table.
OccupancyDist empirical_measure(const EmpiricalModel& model);

/// Tabular MDP whose kernel and mean rewards are the empirical ones (empty
/// cells self-loop with zero reward). Population quantities under the
/// empirical measure on this MDP reproduce E_D without the clip term.
TabularMDP empirical_mdp(const EmpiricalModel& model, const TabularMDP& reference);

}  // namespace pessim
