#pragma once

#include "pessim/network.hpp"
#include "pessim/stats.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pessim {

// ---------------------------------------------------------------------------
// Architecture formulas

enum class ArchProvenance { kTheoremHolder, kTheoremLowdim, kTheoremComposition, kManual };

std::string to_string(ArchProvenance p);

/// Width W, hidden depth L and parameter count P of a uniform-width ReLU
/// network with scalar output, P = W(d+1) + (W^2+W)(L-1) + W + 1.
///
/// The theorem formulas overflow 64 bits quickly. Counts saturate and
/// `overflow` is set; the log fields are always valid.
struct ArchitectureSpec {
  std::uint64_t width = 0;
  std::uint64_t depth = 0;
  int input_dim = 0;
  std::uint64_t param_count = 0;
  ArchProvenance provenance = ArchProvenance::kManual;
  bool overflow = false;
  bool shrunk = false;
  double log_width = 0.0;
  double log_depth = 0.0;
  double log_params = 0.0;

  /// P <= 2 W^2 L, by exact 128-bit integer arithmetic. Overflowed specs
  /// fall back to the log-domain comparison.
  bool param_inequality_holds() const;
};

/// Uniform-width spec with the parameter count filled in.
ArchitectureSpec manual_architecture(std::uint64_t width, std::uint64_t depth, int input_dim);

/// W = 38(s+1)^2 3^d d^(s+1) N ceil(log2 8N), L = 21(s+1)^2 M ceil(log2 8M) + 2d.
ArchitectureSpec arch_from_theorem(int d, int s, std::uint64_t n, std::uint64_t m);

/// Same shape with the intrinsic dimension d_K in place of d.
ArchitectureSpec arch_lowdim(int d_k, int s, std::uint64_t n, std::uint64_t m);

/// Functions of the form g_k o G_{k-1} o ... o G_1 where level i has l_i scalar
/// components, each a function of d_i linear combinations of the previous
/// level's outputs (fan_out[i-1] = l_i, input_dim = l_0).
struct CompositionSpec {
  int input_dim = 1;
  std::vector<int> fan_out;
  std::vector<int> component_dims;
  std::vector<double> zetas;
  /// mixing[i][j] is d_i x l_{i-1}. May be empty when only formulas are needed.
  std::vector<std::vector<Matrix>> mixing;

  int levels() const { return static_cast<int>(fan_out.size()); }
  int fan_in(int level) const { return level == 0 ? input_dim : fan_out[level - 1]; }
  /// Throws InvalidInput when the dimensions do not chain or l_k != 1.
  void validate() const;
};

/// Coordinate-selection mixing: component j of level i reads inputs
/// (j*d_i + t) mod l_{i-1}, t < d_i.
std::vector<std::vector<Matrix>> selection_mixing(const CompositionSpec& spec);

/// W = max_i l_i 38(s+1)^2 3^(d_i) d_i^(s+1) N ceil(log2 8N),
/// L = 21k(s+1)^2 M ceil(log2 8M) + 2 sum d_i + 3(k-1).
ArchitectureSpec arch_composition(const CompositionSpec& spec, int s, std::uint64_t n,
                                  std::uint64_t m);

inline constexpr std::uint64_t kDefaultParamCap = 1000000;

/// Random uniform-width network for the spec; refuses specs over the cap.
Network instantiate(const ArchitectureSpec& spec, std::uint64_t seed,
                    std::uint64_t param_cap = kDefaultParamCap);

/// Scales width and depth by one common factor until the parameter count
/// fits under the cap, keeping the width/depth ratio. Returns the spec
/// unchanged when it already fits.
ArchitectureSpec shrink_architecture(const ArchitectureSpec& spec,
                                     std::uint64_t param_cap = kDefaultParamCap);

nlohmann::json to_json(const ArchitectureSpec& spec);

// ---------------------------------------------------------------------------
// Compositional networks

struct CompositionNetwork {
  Network net;
  /// Hidden-layer indices holding the clamp pairs [relu(y), relu(y - 1)].
  std::vector<int> clamp_layers;
};

/// Assembles per-component networks (components[i][j]: d_i -> 1, at least one
/// hidden layer) into one ReLU network. Components of a level run in
/// parallel, their first layers absorb the mixing matrices, and every level
/// but the last ends in a clamp to [0,1] written as relu(y) - relu(y - 1).
CompositionNetwork build_composition_network(const CompositionSpec& spec,
                                             const std::vector<std::vector<Network>>& components,
                                             std::uint64_t param_cap = kDefaultParamCap);

/// Clamped level outputs relu(y) - relu(y - 1) at every clamp layer.
std::vector<Vector> clamped_values(const CompositionNetwork& cnet, const Vector& x);

// ---------------------------------------------------------------------------
// Hölder targets

struct HolderTargetSpec {
  double zeta = 1.0;
  int s = 0;
  double B = 1.0;
  int d = 1;
  std::uint64_t seed = 0;
  int terms = 6;
  int max_frequency = 3;

  double r() const { return zeta - s; }
  void validate() const;
};

/// f(x) = a_0 + sum_k a_k prod_j cos(pi m_kj x_j), scaled so the Hölder norm
/// (sup of derivatives up to order s, order-s quotient in the sup-norm metric)
/// is at most B. The norm is bounded analytically term by term, so membership
/// holds exactly rather than up to grid resolution.
class HolderTarget {
 public:
  explicit HolderTarget(const HolderTargetSpec& spec);

  double operator()(const Vector& x) const;
  /// Analytic upper bound on the Hölder norm after scaling (<= B).
  double norm_bound() const { return norm_bound_; }
  const HolderTargetSpec& spec() const { return spec_; }
  double constant() const { return a0_; }
  const Vector& coefficients() const { return coef_; }
  /// terms x d integer frequencies.
  const Eigen::MatrixXi& frequencies() const { return freq_; }
  /// s = 0 admits zeta in (0, 1]; reported for visibility.
  bool s_is_zero() const { return spec_.s == 0; }

 private:
  HolderTargetSpec spec_;
  double a0_ = 0.0;
  Vector coef_;
  Eigen::MatrixXi freq_;
  double norm_bound_ = 0.0;
};

HolderTarget make_holder_target(const HolderTargetSpec& spec);

nlohmann::json to_json(const HolderTargetSpec& spec);

// ---------------------------------------------------------------------------
// Evaluation grids and sup error

struct GridSpec {
  int resolution = 64;
  int max_tensor_dim = 3;
  int quasi_points = 100000;
};

/// Tensor grid {0, 1/(res-1), ..., 1}^d as a d x res^d matrix.
Matrix tensor_grid(int d, int resolution);

/// First n points of the Halton sequence in [0,1]^d (d <= 32).
Matrix halton_points(int d, int n);

/// Points used by sup_error for dimension d.
Matrix evaluation_points(int d, const GridSpec& grid);

struct SupError {
  double value = 0.0;
  std::size_t points = 0;
  /// Quasi-random points were used; value is a lower bound on the true sup.
  bool lower_bound = false;
};

using ScalarField = std::function<double(const Vector&)>;

SupError sup_error(const Network& net, const ScalarField& target, const GridSpec& grid = {});

// ---------------------------------------------------------------------------
// Box-counting dimension

struct MinkowskiEstimate {
  double dimension = 0.0;
  std::vector<double> scales;
  std::vector<std::size_t> counts;
  double r_squared = 0.0;
};

/// `count` scales geometrically spaced from `largest` down to `smallest`.
std::vector<double> geometric_scales(double largest, double smallest, int count);

/// Counts occupied boxes floor(x / eps) at each scale; the dimension is the
/// least-squares slope of log count against -log eps. Points are d x n.
MinkowskiEstimate box_counting_dimension(const Matrix& points, const std::vector<double>& scales);

nlohmann::json to_json(const MinkowskiEstimate& est);

// ---------------------------------------------------------------------------
// Approximation trend

struct TrendPoint {
  int width = 0;
  double sup_error = 0.0;
  double train_loss = 0.0;
};

struct ApproxTrend {
  std::vector<TrendPoint> points;
  /// log sup_error against log width (depth fixed, so width tracks N M).
  RateFit fit;
  /// -2 zeta / d.
  double theory_exponent = 0.0;
  /// Each error is at most 1.1 times its predecessor.
  bool non_increasing = false;
};

/// Trains one network per width on a tensor grid of the target with the same
/// budget, then measures sup_error on a finer grid.
ApproxTrend approximation_trend(const HolderTarget& target, const std::vector<int>& widths,
                                int depth, int train_resolution, const TrainerConfig& trainer,
                                const GridSpec& grid, std::uint64_t seed);

}  // namespace pessim
