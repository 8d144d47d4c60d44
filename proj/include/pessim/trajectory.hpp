#pragma once

#include "pessim/mdp.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pessim {

struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
  std::int64_t t = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// One contiguous trajectory. Consecutive transitions chain:
/// transitions[i].s_next == transitions[i + 1].s.
struct Dataset {
  std::vector<Transition> transitions;
  std::string behavior_ref;
  std::uint64_t seed = 0;
  std::int64_t burn_in = 0;

  std::size_t size() const { return transitions.size(); }
  /// Throws InvalidInput when the chaining or time-ordering invariant fails.
  void validate(int num_states, int num_actions) const;
};

struct MixingParams {
  double b = 1.0;
  double c = 1.0;
  double eta = 1.0;
};

// ---------------------------------------------------------------------------
// Sampling

/// Relaxation-time heuristic ceil(10 / (1 - |lambda_2|)) for the mu-chain.
std::int64_t default_burn_in(const TabularMDP& mdp, const Policy& mu);

/// Samples one trajectory of n transitions after discarding burn_in steps.
/// The start state is drawn from the MDP's initial distribution. When
/// burn_in is unset the relaxation-time default is used; a positive burn-in
/// on a non-ergodic chain throws InvalidInput.
Dataset sample_trajectory(const TabularMDP& mdp, const Policy& mu, std::size_t n,
                          std::optional<std::int64_t> burn_in, std::uint64_t seed,
                          std::string behavior_ref = "mu");

/// Realized reward for one step: mean + U[-w, w], clipped into [-r_max, r_max].
double sample_reward(const TabularMDP& mdp, int s, int a, Rng& rng);

/// Modulus of the second-largest eigenvalue of the (s,a)-chain under mu.
/// Throws InvalidInput when the chain is not ergodic.
double spectral_gap(const TabularMDP& mdp, const Policy& mu);

/// Same quantity for an arbitrary row-stochastic kernel.
double second_eigenvalue_modulus(const Matrix& kernel);

// ---------------------------------------------------------------------------
// Mixing diagnostics

/// Bounded probe functions over transitions. The autocovariance profile over
/// this family is a lower-bound surrogate for the C-mixing coefficients; the
/// coefficients themselves (a supremum over a seminorm ball) are not computed.
struct Probe {
  enum class Kind { kStateIndicator, kReward, kCoordinate };
  Kind kind = Kind::kStateIndicator;
  int index = 0;

  /// Parses "state:k", "reward", "coord:j".
  static Probe parse(const std::string& id);
  std::string id() const;
};

struct LagValue {
  int lag = 0;
  double value = 0.0;
};

/// Empirical autocovariance of h(Z_k) against h(Z_{k+n}); lag 0 is the
/// probe's empirical variance.
struct AutocorrelationProfile {
  std::vector<LagValue> points;
  std::size_t sample_size = 0;
  double variance = 0.0;
  /// Values with magnitude at or below this are treated as noise.
  double noise_floor = 0.0;
};

struct EmbeddedDataset;

/// Coordinate probes need an embedding: pass it via `embedded`.
AutocorrelationProfile autocorrelation_profile(const Dataset& ds, const Probe& probe, int max_lag,
                                               const EmbeddedDataset* embedded = nullptr);

/// Autocovariance of an arbitrary scalar series (the workhorse of the above).
AutocorrelationProfile autocovariance(const std::vector<double>& series, int max_lag);

struct MixingFit {
  MixingParams params;
  /// Weighted residual sum of squares of the log-linear fit at the chosen eta.
  double residual = 0.0;
  int lags_used = 0;
  /// Fewer than 5 lags rose above the noise floor.
  bool effectively_independent = false;
};

/// Fits log|cov(n)| = log c - b n^eta for eta in {0.5, 1, 2} by weighted least
/// squares over the leading lags above the noise floor; keeps the best eta.
MixingFit fit_mixing_rate(const AutocorrelationProfile& profile);

// ---------------------------------------------------------------------------
// Embeddings into [0,1]^d

struct EmbedSpec {
  enum class Kind { kOneHot, kCurve, kGrid };
  Kind kind = Kind::kGrid;
  int ambient_dim = 2;

  static EmbedSpec parse(const std::string& name, int ambient_dim);
  std::string name() const;
};

/// Table of embedded points, one column per flattened (s,a) (d x S*A).
Matrix embedding_table(const EmbedSpec& spec, int num_states, int num_actions);

/// Curve used by EmbedSpec::kCurve: x_0 = t and x_j = 0.5 + 0.4 sin(pi (j+1) t + j)
/// for j >= 1, so t is recovered from the first coordinate.
Vector curve_point(double t, int ambient_dim);

struct EmbeddedDataset {
  /// Embedded (s,a) per transition, one column per transition (d x n).
  Matrix points;
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<int> next_states;
  /// Embedding of every (s,a), one column per flattened pair (d x S*A), so
  /// next-state points z(s', a') are available for every a'.
  Matrix table;
  EmbedSpec spec;
  int ambient_dim = 0;
  int num_states = 0;
  int num_actions = 0;
};

EmbeddedDataset embed_dataset(const Dataset& ds, const TabularMDP& mdp, const EmbedSpec& spec);

// ---------------------------------------------------------------------------
// Serialization: CSV (t,s,a,r,s_next) plus a JSON sidecar.

void write_dataset_csv(const Dataset& ds, std::ostream& out);
Dataset read_dataset_csv(std::istream& in);
nlohmann::json dataset_sidecar(const Dataset& ds, const std::optional<EmbedSpec>& embed);

}  // namespace pessim
