#pragma once

#include "pessim/mdp.hpp"
#include "pessim/trajectory.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace pessim {

/// Inputs shared by the rate calculators. Unspecified absolute constants
/// (C1, C2 and every O(.)) take `constant`, which defaults to 1.
struct BoundInputs {
  int d = 2;
  /// Low-dimensional bound: 0 means ceil(minkowski_dim / lambda^2).
  int d_k = 0;
  double minkowski_dim = 0.0;
  double lambda = 0.5;
  double zeta = 1.0;
  int s = 0;
  double B = 1.0;
  double n = 1e4;
  MixingParams mixing;
  double r_max = 1.0;
  double epsilon = 0.0;
  /// Composition: smoothness and input dimension of each level.
  std::vector<double> composition_zetas;
  std::vector<int> composition_dims;
  double constant = 1.0;

  void validate() const;
};

struct RateBound {
  double value = 0.0;
  /// Exponent of |D| in the leading term.
  double exponent = 0.0;
  /// Effective dimension in the exponent (d, d_K or d_*).
  int dimension = 0;
  double zeta_star = 0.0;
};

/// zeta * min(1, zeta).
double zeta_star(double zeta);

/// min_i (zeta_i prod_{l > i} min(zeta_l, 1)) * min(1, zeta).
double zeta_star_composition(const std::vector<double>& zetas, double zeta);

/// C R_max d^{s+max(zeta,1)/2} n^{-z/(d+2z)} ln(n)^{2+1/eta} + C sqrt(eps), z = zeta_star.
RateBound main_bound(const BoundInputs& in);

/// C R_max sqrt(d) d_K^{s+(max(zeta,1)+1)/2} / (1-lambda)^{zeta/2} n^{-z/(d_K+2z)}
/// ln(n)^{2+1/eta} + C sqrt(eps).
RateBound lowdim_bound(const BoundInputs& in);

/// d_K used by lowdim_bound.
int lowdim_dimension(const BoundInputs& in);

/// C R_max d_*^{s+max(zeta,1)/2} n^{-z/(d_*+2z)} ln(n)^{2+1/eta} + C sqrt(eps),
/// with d_* = max_i d_i and z = zeta_star_composition.
RateBound composition_bound(const BoundInputs& in);

/// 19 B (s+1)^2 d^{s+max(zeta,1)/2} (N M)^{-2 zeta / d}; `doubled` uses 38 B.
double approx_bound(double B, int s, double zeta, int d, double N, double M, bool doubled = false);

struct GenBound {
  double value = 0.0;
  std::int64_t n0 = 0;
  /// n < n0: the concentration inequality behind the bound does not apply.
  bool below_threshold = false;
};

/// C R_max sqrt(P L ln P) ln(n)^{(2+eta)/(2 eta)} / sqrt(n).
GenBound gen_bound(double r_max, double P, double L, double n, const MixingParams& mixing,
                   double constant = 1.0);

/// max{ min m >= 3 with m^2 >= 808 c and m / ln(m)^{2/eta} >= 4, ceil(e^{3/b}) }.
std::int64_t n0_threshold(double b, double c, double eta);

struct CoveringBound {
  double vcdim = 0.0;
  /// ln of (e v_max n / ((eps/2) vcdim))^{2 vcdim}.
  double log_covering = 0.0;
  /// Loss class: twice the network bound at half the scale.
  double log_covering_loss = 0.0;
};

CoveringBound vc_and_covering(double P, double L, double v_max, double n, double eps,
                              double constant = 1.0);

// ---------------------------------------------------------------------------
// Numerical checks

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
  std::string context;

  static InequalityCheck make(double lhs, double rhs, std::string context);
};

inline constexpr double kInequalitySlack = 1e-10;

/// lhs = ||f - Q^phi||_{1,rho}, rhs = ||f - T^phi f||_{2,rho} / (1 - gamma C(phi; rho)),
/// where C compares phi's occupancy of the same kind as rho against rho.
/// Throws InvalidInput when gamma C >= 1.
InequalityCheck l1_contraction_check(const TabularMDP& mdp, const OccupancyDist& rho,
                                     const Policy& phi, const QFunction& f);

/// E_{s ~ rho} sum_a |phi(a|s) - pi(a|s)| with rho's state marginal.
double policy_distance(const OccupancyDist& rho, const Policy& phi, const Policy& pi);

/// lhs = ||Q^phi - Q^pi||_{1,rho}, rhs = delta / ((1-gamma)^2 - (1-gamma) delta) with
/// delta = policy_distance. Throws InvalidInput when the denominator is not positive.
InequalityCheck fixed_point_drift_check(const TabularMDP& mdp, const OccupancyDist& rho,
                                        const Policy& phi, const Policy& pi_star);

/// |L(pi,f1) - L(pi,f2) - (E_mu[Tf1 - f1] + E_{d^pi}[f1 - Tf1] + E_mu[f2 - Tf2]
///  + E_{d^pi}[Tf2 - f2])| with E_mu under d^mu.
double loss_decomposition_residual(const TabularMDP& mdp, const Policy& mu, const Policy& pi,
                                   const QFunction& f1, const QFunction& f2);

/// Markov chain on states with a finite family of bounded functions.
struct TailCheckSpec {
  Matrix kernel;
  /// One row per function, one column per state.
  Matrix functions;
  std::vector<double> eps_grid;
  std::size_t n = 2000;
  int trials = 200;
  std::uint64_t seed = 0;
};

struct TailRow {
  double eps = 0.0;
  double empirical = 0.0;
  double bound = 0.0;
  double covering = 0.0;
  bool holds = true;
};

struct TailCheckResult {
  std::vector<TailRow> rows;
  MixingParams mixing;
  std::int64_t n0 = 0;
  bool below_threshold = false;
  double sup_norm = 0.0;
  bool all_hold() const;
};

/// Smallest centre count covering the rows of `functions` at sup-distance r
/// (greedy, an upper bound on the covering number).
int greedy_covering_number(const Matrix& functions, double r);

/// Right-hand side 4 N(eps/4) exp(-3 n eps^2 / (ln(n)^{2/eta} (384 B^2 + 64 eps B))).
double bernstein_bound(double covering, double n, double eps, double B, double eta);

/// Simulates `trials` stationary trajectories and compares the frequency of
/// sup_f |mean f(X_i) - E f| > eps with the bound. Mixing parameters come from
/// the kernel's second eigenvalue: b = -ln|lambda_2|, c = 1, eta = 1.
TailCheckResult bernstein_tail_check(const TailCheckSpec& spec);

nlohmann::json to_json(const InequalityCheck& check);
nlohmann::json to_json(const TailCheckResult& result);

}  // namespace pessim
