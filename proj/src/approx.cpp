#include "pessim/approx.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

namespace pessim {

namespace {

using u128 = unsigned __int128;
constexpr u128 kU128Max = ~static_cast<u128>(0);
constexpr u128 kU64Max = std::numeric_limits<std::uint64_t>::max();

u128 mul(u128 a, u128 b, bool& overflow) {
  if (a != 0 && b > kU128Max / a) {
    overflow = true;
    return kU128Max;
  }
  return a * b;
}

u128 add(u128 a, u128 b, bool& overflow) {
  if (b > kU128Max - a) {
    overflow = true;
    return kU128Max;
  }
  return a + b;
}

u128 ipow(u128 base, int exp, bool& overflow) {
  u128 r = 1;
  for (int i = 0; i < exp; ++i) r = mul(r, base, overflow);
  return r;
}

std::uint64_t ceil_log2(std::uint64_t n) {
  std::uint64_t k = 0;
  while ((std::uint64_t{1} << k) < n) ++k;
  return k;
}

/// ceil(log2(8 n)).
std::uint64_t ceil_log2_8n(std::uint64_t n) { return 3 + ceil_log2(n); }

/// 38 (s+1)^2 3^d d^(s+1) N ceil(log2 8N), exact and in log form.
u128 block_width(int d, int s, std::uint64_t n, bool& overflow, double& log_value) {
  u128 w = 38;
  w = mul(w, static_cast<u128>((s + 1) * (s + 1)), overflow);
  w = mul(w, ipow(3, d, overflow), overflow);
  w = mul(w, ipow(static_cast<u128>(d), s + 1, overflow), overflow);
  w = mul(w, n, overflow);
  w = mul(w, ceil_log2_8n(n), overflow);
  log_value = std::log(38.0) + 2.0 * std::log(s + 1.0) + d * std::log(3.0) +
              (s + 1) * std::log(static_cast<double>(d)) + std::log(static_cast<double>(n)) +
              std::log(static_cast<double>(ceil_log2_8n(n)));
  return w;
}

/// 21 k (s+1)^2 M ceil(log2 8M).
u128 block_depth(int k, int s, std::uint64_t m, bool& overflow) {
  u128 l = 21;
  l = mul(l, static_cast<u128>(k), overflow);
  l = mul(l, static_cast<u128>((s + 1) * (s + 1)), overflow);
  l = mul(l, m, overflow);
  l = mul(l, ceil_log2_8n(m), overflow);
  return l;
}

long double params_of(long double w, long double l, int d) {
  return w * (d + 1) + (w * w + w) * (l - 1) + w + 1;
}

ArchitectureSpec finish(u128 width, u128 depth, int d, bool overflow, double log_width,
                        ArchProvenance provenance) {
  ArchitectureSpec spec;
  spec.input_dim = d;
  spec.provenance = provenance;
  spec.log_width = log_width;
  spec.log_depth = std::log(static_cast<double>(depth));
  bool of = overflow;
  // P = W(d+1) + (W^2 + W)(L-1) + W + 1
  u128 p = mul(width, static_cast<u128>(d + 1), of);
  const u128 w2w = add(mul(width, width, of), width, of);
  p = add(p, mul(w2w, depth - 1, of), of);
  p = add(add(p, width, of), 1, of);
  if (width > kU64Max || depth > kU64Max || p > kU64Max) of = true;
  spec.overflow = of;
  spec.width = width > kU64Max ? std::numeric_limits<std::uint64_t>::max()
                               : static_cast<std::uint64_t>(width);
  spec.depth = depth > kU64Max ? std::numeric_limits<std::uint64_t>::max()
                               : static_cast<std::uint64_t>(depth);
  spec.param_count = (of || p > kU64Max) ? std::numeric_limits<std::uint64_t>::max()
                                         : static_cast<std::uint64_t>(p);
  // log P = log(W^2 (L-1)) + log(1 + rest / (W^2 (L-1))) evaluated in long double.
  const long double lw = std::exp(static_cast<long double>(log_width));
  const long double pl = params_of(lw, static_cast<long double>(depth), d);
  spec.log_params = static_cast<double>(std::log(pl));
  return spec;
}

}  // namespace

std::string to_string(ArchProvenance p) {
  switch (p) {
    case ArchProvenance::kTheoremHolder: return "theorem-holder";
    case ArchProvenance::kTheoremLowdim: return "theorem-lowdim";
    case ArchProvenance::kTheoremComposition: return "theorem-composition";
    case ArchProvenance::kManual: return "manual";
  }
  return "manual";
}

bool ArchitectureSpec::param_inequality_holds() const {
  if (overflow) {
    return log_params <= std::log(2.0) + 2.0 * log_width + log_depth + 1e-12;
  }
  bool of = false;
  const u128 w = width;
  const u128 rhs = mul(mul(mul(2, w, of), w, of), depth, of);
  if (of) return true;  // rhs exceeds 2^128 while P < 2^64
  return static_cast<u128>(param_count) <= rhs;
}

ArchitectureSpec manual_architecture(std::uint64_t width, std::uint64_t depth, int input_dim) {
  if (width == 0 || depth == 0 || input_dim <= 0)
    throw InvalidInput("architecture needs positive width, depth and input dimension");
  return finish(width, depth, input_dim, false, std::log(static_cast<double>(width)),
                ArchProvenance::kManual);
}

ArchitectureSpec arch_from_theorem(int d, int s, std::uint64_t n, std::uint64_t m) {
  if (d < 1 || s < 0 || n < 1 || m < 1) throw InvalidInput("arch_from_theorem: need d,N,M >= 1, s >= 0");
  bool of = false;
  double log_w = 0.0;
  const u128 w = block_width(d, s, n, of, log_w);
  const u128 l = add(block_depth(1, s, m, of), static_cast<u128>(2 * d), of);
  return finish(w, l, d, of, log_w, ArchProvenance::kTheoremHolder);
}

ArchitectureSpec arch_lowdim(int d_k, int s, std::uint64_t n, std::uint64_t m) {
  ArchitectureSpec spec = arch_from_theorem(d_k, s, n, m);
  spec.provenance = ArchProvenance::kTheoremLowdim;
  return spec;
}

void CompositionSpec::validate() const {
  const int k = levels();
  if (k < 1) throw InvalidInput("composition needs at least one level");
  if (input_dim < 1) throw InvalidInput("composition input dimension must be positive");
  if (static_cast<int>(component_dims.size()) != k)
    throw InvalidInput("composition: one component dimension per level required");
  if (!zetas.empty() && static_cast<int>(zetas.size()) != k)
    throw InvalidInput("composition: one smoothness per level required");
  for (int i = 0; i < k; ++i) {
    if (fan_out[i] < 1 || component_dims[i] < 1)
      throw InvalidInput("composition: fan-out and component dimensions must be positive");
    if (!zetas.empty() && !(zetas[i] > 0.0)) throw InvalidInput("composition: zetas must be positive");
  }
  if (fan_out.back() != 1) throw InvalidInput("composition: the last level must have one component");
  if (mixing.empty()) return;
  if (static_cast<int>(mixing.size()) != k) throw InvalidInput("composition: mixing per level required");
  for (int i = 0; i < k; ++i) {
    if (static_cast<int>(mixing[i].size()) != fan_out[i])
      throw InvalidInput("composition: one mixing matrix per component required");
    for (const auto& w : mixing[i]) {
      if (w.rows() != component_dims[i] || w.cols() != fan_in(i))
        throw InvalidInput("composition: mixing matrix of level " + std::to_string(i + 1) +
                           " must be d_i x l_{i-1}");
    }
  }
}

std::vector<std::vector<Matrix>> selection_mixing(const CompositionSpec& spec) {
  std::vector<std::vector<Matrix>> out;
  for (int i = 0; i < spec.levels(); ++i) {
    const int d = spec.component_dims[i];
    const int in = spec.fan_in(i);
    std::vector<Matrix> level;
    for (int j = 0; j < spec.fan_out[i]; ++j) {
      Matrix w = Matrix::Zero(d, in);
      for (int t = 0; t < d; ++t) w(t, (j * d + t) % in) = 1.0;
      level.push_back(std::move(w));
    }
    out.push_back(std::move(level));
  }
  return out;
}

ArchitectureSpec arch_composition(const CompositionSpec& spec, int s, std::uint64_t n,
                                  std::uint64_t m) {
  spec.validate();
  if (s < 0 || n < 1 || m < 1) throw InvalidInput("arch_composition: need N,M >= 1, s >= 0");
  const int k = spec.levels();
  bool of = false;
  u128 width = 0;
  double log_width = -std::numeric_limits<double>::infinity();
  u128 dim_sum = 0;
  for (int i = 0; i < k; ++i) {
    double log_block = 0.0;
    const u128 block = block_width(spec.component_dims[i], s, n, of, log_block);
    const u128 w = mul(static_cast<u128>(spec.fan_out[i]), block, of);
    width = std::max(width, w);
    log_width = std::max(log_width, std::log(static_cast<double>(spec.fan_out[i])) + log_block);
    dim_sum += static_cast<u128>(spec.component_dims[i]);
  }
  u128 depth = block_depth(k, s, m, of);
  depth = add(depth, 2 * dim_sum, of);
  depth = add(depth, static_cast<u128>(3 * (k - 1)), of);
  return finish(width, depth, spec.input_dim, of, log_width, ArchProvenance::kTheoremComposition);
}

Network instantiate(const ArchitectureSpec& spec, std::uint64_t seed, std::uint64_t param_cap) {
  if (spec.overflow || spec.param_count > param_cap)
    throw InvalidInput("architecture with " +
                       (spec.overflow ? std::string("overflowing") : std::to_string(spec.param_count)) +
                       " parameters exceeds the instantiation cap of " + std::to_string(param_cap));
  std::vector<int> widths(spec.depth, static_cast<int>(spec.width));
  return Network::random(spec.input_dim, widths, 1, seed);
}

ArchitectureSpec shrink_architecture(const ArchitectureSpec& spec, std::uint64_t param_cap) {
  if (!spec.overflow && spec.param_count <= param_cap) return spec;
  const long double w = std::exp(static_cast<long double>(spec.log_width));
  const long double l = std::exp(static_cast<long double>(spec.log_depth));
  auto dims = [&](long double t) {
    const long double wt = std::max<long double>(1.0L, std::floor(w * t));
    const long double lt = std::max<long double>(1.0L, std::floor(l * t));
    return std::pair{wt, lt};
  };
  auto fits = [&](long double t) {
    const auto [wt, lt] = dims(t);
    return params_of(wt, lt, spec.input_dim) <= static_cast<long double>(param_cap);
  };
  long double lo = 0.0L;  // log t that fits
  long double hi_t = 0.0L;
  long double lo_t = -std::log(std::max(w, l)) - 1.0L;
  if (!fits(std::exp(lo_t)))
    throw InvalidInput("no shape-preserving shrink fits the parameter cap");
  lo = lo_t;
  for (int it = 0; it < 200; ++it) {
    const long double mid = 0.5L * (lo + hi_t);
    if (fits(std::exp(mid))) lo = mid; else hi_t = mid;
  }
  const auto [wt, lt] = dims(std::exp(lo));
  ArchitectureSpec out = manual_architecture(static_cast<std::uint64_t>(wt),
                                             static_cast<std::uint64_t>(lt), spec.input_dim);
  out.provenance = spec.provenance;
  out.shrunk = true;
  return out;
}

nlohmann::json to_json(const ArchitectureSpec& spec) {
  return {{"width", spec.width},
          {"depth", spec.depth},
          {"input_dim", spec.input_dim},
          {"param_count", spec.param_count},
          {"provenance", to_string(spec.provenance)},
          {"overflow", spec.overflow},
          {"shrunk", spec.shrunk},
          {"log_width", spec.log_width},
          {"log_depth", spec.log_depth},
          {"log_params", spec.log_params},
          {"param_inequality_holds", spec.param_inequality_holds()}};
}

// ---------------------------------------------------------------------------

CompositionNetwork build_composition_network(const CompositionSpec& spec,
                                             const std::vector<std::vector<Network>>& components,
                                             std::uint64_t param_cap) {
  spec.validate();
  const int k = spec.levels();
  const auto mixing = spec.mixing.empty() ? selection_mixing(spec) : spec.mixing;
  if (static_cast<int>(components.size()) != k)
    throw InvalidInput("composition network: one component list per level required");
  for (int i = 0; i < k; ++i) {
    if (static_cast<int>(components[i].size()) != spec.fan_out[i])
      throw InvalidInput("composition network: wrong number of components at a level");
    for (const auto& c : components[i]) {
      if (c.layers().empty() || c.input_dim() != spec.component_dims[i] || c.output_dim() != 1 ||
          c.depth() < 1)
        throw InvalidInput("composition network: components must map d_i -> 1 with a hidden layer");
    }
  }

  // Shape pass: hidden widths per level after padding, to enforce the cap first.
  std::uint64_t params = 0;
  {
    std::uint64_t in_width = static_cast<std::uint64_t>(spec.input_dim);
    for (int i = 0; i < k; ++i) {
      int hidden = 0;
      for (const auto& c : components[i]) hidden = std::max(hidden, c.depth());
      for (int t = 0; t < hidden; ++t) {
        std::uint64_t rows = 0;
        for (const auto& c : components[i]) {
          const int idx = std::min(t, c.depth() - 1);
          rows += static_cast<std::uint64_t>(c.layers()[idx].weight.rows());
        }
        params += rows * (in_width + 1);
        in_width = rows;
      }
      const std::uint64_t out_rows = i + 1 < k ? 2 * static_cast<std::uint64_t>(spec.fan_out[i]) : 1;
      params += out_rows * (in_width + 1);
      in_width = out_rows;
      if (params > param_cap)
        throw InvalidInput("composition network exceeds the parameter cap of " +
                           std::to_string(param_cap));
    }
  }

  std::vector<DenseLayer> layers;
  std::vector<int> clamp_layers;
  // Maps the previous layer's activations to this level's inputs.
  Matrix in_map = Matrix::Identity(spec.input_dim, spec.input_dim);
  for (int i = 0; i < k; ++i) {
    const int l = spec.fan_out[i];
    int hidden = 0;
    for (const auto& c : components[i]) hidden = std::max(hidden, c.depth());

    // Pad every component to the same hidden depth with identity layers,
    // inserted after its last hidden layer (activations there are >= 0).
    std::vector<std::vector<DenseLayer>> hid(l);
    std::vector<DenseLayer> out(l);
    for (int j = 0; j < l; ++j) {
      const auto& cl = components[i][j].layers();
      hid[j].assign(cl.begin(), cl.end() - 1);
      const Eigen::Index w = hid[j].back().weight.rows();
      while (static_cast<int>(hid[j].size()) < hidden)
        hid[j].push_back({Matrix::Identity(w, w), Vector::Zero(w)});
      out[j] = cl.back();
    }

    for (int t = 0; t < hidden; ++t) {
      Eigen::Index rows = 0;
      for (int j = 0; j < l; ++j) rows += hid[j][t].weight.rows();
      const Eigen::Index cols = t == 0 ? in_map.cols() : layers.back().weight.rows();
      DenseLayer layer{Matrix::Zero(rows, cols), Vector::Zero(rows)};
      Eigen::Index r = 0, c = 0;
      for (int j = 0; j < l; ++j) {
        const auto& h = hid[j][t];
        if (t == 0) {
          layer.weight.middleRows(r, h.weight.rows()) = h.weight * mixing[i][j] * in_map;
        } else {
          layer.weight.block(r, c, h.weight.rows(), h.weight.cols()) = h.weight;
          c += h.weight.cols();
        }
        layer.bias.segment(r, h.bias.size()) = h.bias;
        r += h.weight.rows();
      }
      layers.push_back(std::move(layer));
    }

    const Eigen::Index cols = layers.back().weight.rows();
    if (i + 1 < k) {
      DenseLayer clamp{Matrix::Zero(2 * l, cols), Vector::Zero(2 * l)};
      Eigen::Index c = 0;
      for (int j = 0; j < l; ++j) {
        const Eigen::Index w = out[j].weight.cols();
        clamp.weight.block(2 * j, c, 1, w) = out[j].weight;
        clamp.weight.block(2 * j + 1, c, 1, w) = out[j].weight;
        clamp.bias(2 * j) = out[j].bias(0);
        clamp.bias(2 * j + 1) = out[j].bias(0) - 1.0;
        c += w;
      }
      clamp_layers.push_back(static_cast<int>(layers.size()));
      layers.push_back(std::move(clamp));
      in_map = Matrix::Zero(l, 2 * l);
      for (int j = 0; j < l; ++j) {
        in_map(j, 2 * j) = 1.0;
        in_map(j, 2 * j + 1) = -1.0;
      }
    } else {
      layers.push_back(out[0]);
    }
  }
  return {Network(std::move(layers)), std::move(clamp_layers)};
}

std::vector<Vector> clamped_values(const CompositionNetwork& cnet, const Vector& x) {
  const auto trace = forward_trace(cnet.net, x);
  std::vector<Vector> out;
  for (int idx : cnet.clamp_layers) {
    const Vector& u = trace[idx];
    Vector v(u.size() / 2);
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = u(2 * j) - u(2 * j + 1);
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------

void HolderTargetSpec::validate() const {
  if (s < 0) throw InvalidInput("Hölder spec: s must be a nonnegative integer");
  if (!(r() > 0.0) || r() > 1.0) throw InvalidInput("Hölder spec: zeta - s must lie in (0, 1]");
  if (!(B > 0.0)) throw InvalidInput("Hölder spec: B must be positive");
  if (d < 1) throw InvalidInput("Hölder spec: d must be positive");
  if (terms < 0 || max_frequency < 1) throw InvalidInput("Hölder spec: bad series size");
}

namespace {

void multi_indices(int d, int order, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == d - 1) {
    cur.push_back(order);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int a = 0; a <= order; ++a) {
    cur.push_back(a);
    multi_indices(d, order - a, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> indices_of_order(int d, int order) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  multi_indices(d, order, cur, out);
  return out;
}

}  // namespace

HolderTarget::HolderTarget(const HolderTargetSpec& spec) : spec_(spec) {
  spec_.validate();
  const int d = spec_.d;
  const int K = spec_.terms;
  Rng rng(spec_.seed);
  a0_ = rng.uniform(-1.0, 1.0);
  coef_ = Vector::Zero(K);
  freq_ = Eigen::MatrixXi::Zero(K, d);
  for (int k = 0; k < K; ++k) {
    int nonzero = 0;
    for (int j = 0; j < d; ++j) {
      freq_(k, j) = static_cast<int>(rng.index(static_cast<std::size_t>(spec_.max_frequency) + 1));
      nonzero += freq_(k, j) != 0;
    }
    if (nonzero == 0)
      freq_(k, static_cast<int>(rng.index(d))) =
          1 + static_cast<int>(rng.index(static_cast<std::size_t>(spec_.max_frequency)));
    coef_(k) = rng.uniform(-1.0, 1.0);
  }

  const double pi = std::numbers::pi;
  const double r = spec_.r();
  // sup |d^alpha term_k| <= |a_k| prod_j (pi m_kj)^alpha_j; the l1 norm of its
  // gradient bounds the sup-norm Lipschitz constant.
  auto derivative_sup = [&](const std::vector<int>& alpha, bool lipschitz) {
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      double t = std::abs(coef_(k));
      for (int j = 0; j < d; ++j) t *= std::pow(pi * freq_(k, j), alpha[j]);
      if (lipschitz) t *= pi * freq_.row(k).cast<double>().sum();
      total += t;
    }
    return total;
  };
  double norm = 0.0;
  for (int order = 0; order <= spec_.s; ++order) {
    for (const auto& alpha : indices_of_order(d, order)) {
      double m = derivative_sup(alpha, false);
      if (order == 0) m += std::abs(a0_);
      norm = std::max(norm, m);
      if (order == spec_.s) {
        // |g(x) - g(y)| <= min(L t, 2M) <= L^r (2M)^(1-r) t^r for t = |x - y|_inf.
        const double lip = derivative_sup(alpha, true);
        const double q = r >= 1.0 ? lip : std::pow(lip, r) * std::pow(2.0 * m, 1.0 - r);
        norm = std::max(norm, q);
      }
    }
  }
  if (norm > 0.0) {
    const double scale = spec_.B / norm * (1.0 - 1e-12);
    a0_ *= scale;
    coef_ *= scale;
    norm_bound_ = norm * scale;
  }
}

double HolderTarget::operator()(const Vector& x) const {
  if (x.size() != spec_.d) throw InvalidInput("Hölder target: input dimension mismatch");
  const double pi = std::numbers::pi;
  double v = a0_;
  for (Eigen::Index k = 0; k < coef_.size(); ++k) {
    double t = coef_(k);
    for (int j = 0; j < spec_.d; ++j) t *= std::cos(pi * freq_(k, j) * x(j));
    v += t;
  }
  return v;
}

HolderTarget make_holder_target(const HolderTargetSpec& spec) { return HolderTarget(spec); }

nlohmann::json to_json(const HolderTargetSpec& spec) {
  return {{"zeta", spec.zeta}, {"s", spec.s},         {"r", spec.r()},
          {"B", spec.B},       {"d", spec.d},         {"seed", spec.seed},
          {"terms", spec.terms}, {"max_frequency", spec.max_frequency}};
}

// ---------------------------------------------------------------------------

Matrix tensor_grid(int d, int resolution) {
  if (d < 1 || resolution < 2) throw InvalidInput("tensor_grid: need d >= 1 and resolution >= 2");
  const double total = std::pow(static_cast<double>(resolution), d);
  if (total > 5e7) throw InvalidInput("tensor_grid: too many points");
  const auto n = static_cast<Eigen::Index>(total);
  Matrix pts(d, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index rem = c;
    for (int j = 0; j < d; ++j) {
      pts(j, c) = static_cast<double>(rem % resolution) / (resolution - 1);
      rem /= resolution;
    }
  }
  return pts;
}

Matrix halton_points(int d, int n) {
  static constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                                    37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79,
                                    83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
  if (d < 1 || d > 32 || n < 1) throw InvalidInput("halton_points: need 1 <= d <= 32, n >= 1");
  Matrix pts(d, n);
  for (int j = 0; j < d; ++j) {
    const int base = kPrimes[j];
    for (int i = 0; i < n; ++i) {
      double f = 1.0, r = 0.0;
      for (int idx = i + 1; idx > 0; idx /= base) {
        f /= base;
        r += f * (idx % base);
      }
      pts(j, i) = r;
    }
  }
  return pts;
}

Matrix evaluation_points(int d, const GridSpec& grid) {
  if (d <= grid.max_tensor_dim) return tensor_grid(d, grid.resolution);
  return halton_points(d, grid.quasi_points);
}

SupError sup_error(const Network& net, const ScalarField& target, const GridSpec& grid) {
  const int d = net.input_dim();
  const Matrix pts = evaluation_points(d, grid);
  SupError out;
  out.points = static_cast<std::size_t>(pts.cols());
  out.lower_bound = d > grid.max_tensor_dim;
  constexpr Eigen::Index kChunk = 4096;
  for (Eigen::Index c0 = 0; c0 < pts.cols(); c0 += kChunk) {
    const Eigen::Index len = std::min(kChunk, pts.cols() - c0);
    const Matrix y = forward_batch(net, pts.middleCols(c0, len));
    for (Eigen::Index c = 0; c < len; ++c) {
      out.value = std::max(out.value, std::abs(y(0, c) - target(pts.col(c0 + c))));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> geometric_scales(double largest, double smallest, int count) {
  if (!(largest > smallest) || !(smallest > 0.0) || count < 2)
    throw InvalidInput("geometric_scales: need largest > smallest > 0 and count >= 2");
  std::vector<double> out;
  const double ratio = std::log(smallest / largest) / (count - 1);
  for (int i = 0; i < count; ++i) out.push_back(largest * std::exp(ratio * i));
  return out;
}

namespace {

struct BoxHash {
  std::size_t operator()(const std::vector<std::int64_t>& key) const {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL;
    for (auto v : key) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

MinkowskiEstimate box_counting_dimension(const Matrix& points, const std::vector<double>& scales) {
  if (points.cols() < 100) throw InvalidInput("box counting needs at least 100 points");
  if (scales.size() < 4) throw InvalidInput("box counting needs at least 4 scales");
  if (!points.allFinite()) throw InvalidInput("box counting: non-finite points");
  double lo = scales.front(), hi = scales.front();
  for (double e : scales) {
    if (!(e > 0.0) || !std::isfinite(e)) throw InvalidInput("box counting: scales must be positive");
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (hi / lo < 10.0 - 1e-9) throw InvalidInput("box counting: scales must span a decade");

  MinkowskiEstimate est;
  std::vector<double> x, y;
  const auto d = points.rows();
  for (double eps : scales) {
    std::unordered_set<std::vector<std::int64_t>, BoxHash> boxes;
    std::vector<std::int64_t> key(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      for (Eigen::Index j = 0; j < d; ++j)
        key[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(std::floor(points(j, c) / eps));
      boxes.insert(key);
    }
    est.scales.push_back(eps);
    est.counts.push_back(boxes.size());
    x.push_back(-std::log(eps));
    y.push_back(std::log(static_cast<double>(boxes.size())));
  }
  const RateFit fit = linear_fit(x, y);
  est.dimension = std::max(0.0, fit.slope);
  est.r_squared = fit.r_squared;
  return est;
}

nlohmann::json to_json(const MinkowskiEstimate& est) {
  return {{"dimension", est.dimension},
          {"scales", est.scales},
          {"counts", est.counts},
          {"r_squared", est.r_squared}};
}

// ---------------------------------------------------------------------------

ApproxTrend approximation_trend(const HolderTarget& target, const std::vector<int>& widths,
                                int depth, int train_resolution, const TrainerConfig& trainer,
                                const GridSpec& grid, std::uint64_t seed) {
  if (widths.empty() || depth < 1) throw InvalidInput("approximation_trend: need widths and depth >= 1");
  const int d = target.spec().d;
  const Matrix inputs = tensor_grid(d, train_resolution);
  Matrix targets(1, inputs.cols());
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) targets(0, c) = target(inputs.col(c));

  ApproxTrend out;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int w = widths[i];
    Network net = Network::random(d, std::vector<int>(depth, w), 1,
                                  derive_seed(seed, static_cast<std::uint64_t>(w)));
    TrainResult res = train_regression(std::move(net), inputs, targets, trainer);
    if (res.diverged) throw NumericalError("approximation_trend: training diverged at width " + std::to_string(w));
    const SupError err = sup_error(res.net, [&](const Vector& x) { return target(x); }, grid);
    out.points.push_back({w, err.value, res.loss_trace.back()});
    pts.emplace_back(static_cast<double>(w), err.value);
  }
  out.non_increasing = true;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    if (out.points[i].sup_error > 1.1 * out.points[i - 1].sup_error) out.non_increasing = false;
  }
  if (pts.size() >= 2) out.fit = rate_fit(pts);
  out.theory_exponent = -2.0 * target.spec().zeta / d;
  return out;
}

}  // namespace pessim
