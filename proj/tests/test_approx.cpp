#include "pessim/approx.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace pessim {
namespace {

/// Width, depth and parameter count by the closed-form formulas in plain integers.
std::uint64_t ref_width(int d, int s, std::uint64_t n) {
  std::uint64_t w = 38ULL * (s + 1) * (s + 1) * n * (3 + static_cast<std::uint64_t>(std::ceil(std::log2(n))));
  for (int i = 0; i < d; ++i) w *= 3;
  for (int i = 0; i < s + 1; ++i) w *= static_cast<std::uint64_t>(d);
  return w;
}

std::uint64_t ref_params(std::uint64_t w, std::uint64_t l, int d) {
  return w * (d + 1) + (w * w + w) * (l - 1) + w + 1;
}

CompositionSpec additive_pairs() {
  CompositionSpec c;
  c.input_dim = 4;
  c.fan_out = {2, 1};
  c.component_dims = {2, 2};
  c.zetas = {1.0, 1.0};
  return c;
}

TEST(Architecture, TheoremExamples) {
  const ArchitectureSpec a = arch_from_theorem(2, 1, 4, 2);
  EXPECT_EQ(a.width, 109440u);
  EXPECT_EQ(a.depth, 676u);
  EXPECT_EQ(a.param_count, ref_params(109440, 676, 2));
  const ArchitectureSpec b = arch_from_theorem(1, 0, 1, 1);
  EXPECT_EQ(b.width, 342u);
  EXPECT_EQ(b.depth, 65u);
  EXPECT_LT(arch_from_theorem(2, 1, 1, 2).width, arch_from_theorem(2, 1, 2, 2).width);
  EXPECT_FALSE(a.overflow);
}

TEST(Architecture, FormulasMatchIndependentArithmetic) {
  for (int d = 1; d <= 4; ++d)
    for (int s = 0; s <= 2; ++s)
      for (std::uint64_t n : {1u, 2u, 3u, 5u, 8u}) {
        const ArchitectureSpec a = arch_from_theorem(d, s, n, 3);
        EXPECT_EQ(a.width, ref_width(d, s, n));
        EXPECT_EQ(a.depth, 21ULL * (s + 1) * (s + 1) * 3 * 5 + 2ULL * d);
      }
}

TEST(Architecture, LowdimExamples) {
  const ArchitectureSpec a = arch_lowdim(1, 1, 2, 1);
  EXPECT_EQ(a.width, 3648u);
  EXPECT_EQ(a.depth, 254u);
  const ArchitectureSpec t = arch_from_theorem(3, 1, 2, 2);
  const ArchitectureSpec l = arch_lowdim(3, 1, 2, 2);
  EXPECT_EQ(t.width, l.width);
  EXPECT_EQ(t.depth, l.depth);
  // Intrinsic 2 vs ambient 8 at the same N, M: ratio 3^6 (8/2)^{s+1}.
  const ArchitectureSpec lo = arch_lowdim(2, 1, 2, 2);
  const ArchitectureSpec hi = arch_from_theorem(8, 1, 2, 2);
  EXPECT_EQ(hi.width, lo.width * 729ULL * 16ULL);
}

TEST(Architecture, CompositionExamples) {
  const ArchitectureSpec a = arch_composition(additive_pairs(), 1, 2, 2);
  EXPECT_EQ(a.width, 87552u);
  EXPECT_EQ(a.depth, 1355u);

  CompositionSpec single;
  single.input_dim = 3;
  single.fan_out = {1};
  single.component_dims = {3};
  const ArchitectureSpec c = arch_composition(single, 1, 2, 2);
  const ArchitectureSpec t = arch_from_theorem(3, 1, 2, 2);
  EXPECT_EQ(c.width, t.width);
  EXPECT_EQ(c.depth, t.depth);

  // Raising the dimension of the non-maximal level leaves the width alone.
  CompositionSpec mixed = additive_pairs();
  mixed.component_dims = {2, 1};
  const auto w0 = arch_composition(mixed, 1, 2, 2).width;
  mixed.component_dims = {2, 2};
  EXPECT_EQ(arch_composition(mixed, 1, 2, 2).width, w0);
  mixed.component_dims = {3, 2};
  EXPECT_GT(arch_composition(mixed, 1, 2, 2).width, w0);
}

TEST(Architecture, ParameterInequalityEverywhere) {
  for (int d = 1; d <= 12; ++d)
    for (int s = 0; s <= 3; ++s)
      for (std::uint64_t n : {1u, 4u, 64u, 1000u})
        for (std::uint64_t m : {1u, 3u, 100u}) {
          EXPECT_TRUE(arch_from_theorem(d, s, n, m).param_inequality_holds());
          EXPECT_TRUE(arch_lowdim(d, s, n, m).param_inequality_holds());
        }
  EXPECT_TRUE(arch_composition(additive_pairs(), 2, 9, 9).param_inequality_holds());
  for (std::uint64_t w : {2u, 10u, 64u})
    for (std::uint64_t l : {1u, 2u, 7u})
      for (int d : {1, 5, 40}) {
        if (static_cast<std::uint64_t>(d) < w) {
          EXPECT_TRUE(manual_architecture(w, l, d).param_inequality_holds());
        }
      }
  // A layer narrower than its input breaks the inequality and is reported.
  EXPECT_FALSE(manual_architecture(1, 1, 40).param_inequality_holds());
}

TEST(Architecture, HugeSpecsOverflowButKeepLogs) {
  const ArchitectureSpec a = arch_from_theorem(40, 3, 1000000, 1000000);
  EXPECT_TRUE(a.overflow);
  EXPECT_TRUE(std::isfinite(a.log_params));
  EXPECT_TRUE(a.param_inequality_holds());
  EXPECT_THROW(instantiate(a, 1), InvalidInput);
}

TEST(Architecture, ShrinkRespectsCapAndRatio) {
  const ArchitectureSpec a = arch_from_theorem(2, 0, 2, 1);
  const ArchitectureSpec s = shrink_architecture(a, 2000);
  EXPECT_TRUE(s.shrunk);
  EXPECT_LE(s.param_count, 2000u);
  EXPECT_EQ(s.param_count, ref_params(s.width, s.depth, 2));
  const Network net = instantiate(s, 3, 2000);
  EXPECT_EQ(static_cast<std::uint64_t>(net.param_count()), s.param_count);
  EXPECT_EQ(static_cast<std::uint64_t>(net.depth()), s.depth);
  const ArchitectureSpec small = manual_architecture(4, 2, 2);
  EXPECT_FALSE(shrink_architecture(small, 2000).shrunk);
  EXPECT_THROW(instantiate(a, 1, 2000), InvalidInput);
}

TEST(CompositionNetwork, IdentityComponentsGiveClampedIdentity) {
  // Components computing relu(x) - relu(x - 1) pass [0,1] inputs through.
  CompositionSpec spec;
  spec.input_dim = 2;
  spec.fan_out = {2, 1};
  spec.component_dims = {1, 1};
  auto identity = [] {
    Network n = Network::zeros(1, {1}, 1);
    n.layers()[0].weight(0, 0) = 1.0;
    n.layers()[1].weight(0, 0) = 1.0;
    return n;
  };
  const CompositionNetwork cnet =
      build_composition_network(spec, {{identity(), identity()}, {identity()}});
  for (double x0 = -0.5; x0 <= 1.5; x0 += 0.05) {
    Vector x(2);
    x << x0, 0.3;
    const double out = forward(cnet.net, x)(0);
    EXPECT_NEAR(out, std::clamp(x0, 0.0, 1.0), 1e-12);
    for (const Vector& v : clamped_values(cnet, x))
      EXPECT_TRUE((v.array() >= -1e-15).all() && (v.array() <= 1.0 + 1e-15).all());
  }
}

TEST(CompositionNetwork, RandomComponentsMatchDirectEvaluation) {
  CompositionSpec spec = additive_pairs();
  spec.mixing = selection_mixing(spec);
  std::vector<std::vector<Network>> comps(2);
  for (int j = 0; j < 2; ++j) comps[0].push_back(Network::random(2, {5}, 1, 10 + j));
  comps[1].push_back(Network::random(2, {4, 3}, 1, 20));
  const CompositionNetwork cnet = build_composition_network(spec, comps);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    Vector x(4);
    for (int i = 0; i < 4; ++i) x(i) = rng.uniform();
    Vector mid(2);
    for (int j = 0; j < 2; ++j)
      mid(j) = std::clamp(forward(comps[0][j], spec.mixing[0][j] * x)(0), 0.0, 1.0);
    const double expect = forward(comps[1][0], spec.mixing[1][0] * mid)(0);
    EXPECT_NEAR(forward(cnet.net, x)(0), expect, 1e-12);
  }
}

TEST(CompositionSpec, ValidationErrors) {
  CompositionSpec c = additive_pairs();
  c.fan_out = {2, 2};
  EXPECT_THROW(c.validate(), InvalidInput);
  c = additive_pairs();
  c.component_dims = {2};
  EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(HolderTarget, ConstantWhenNoTerms) {
  HolderTargetSpec s;
  s.terms = 0;
  const HolderTarget f(s);
  EXPECT_EQ(f(Vector::Constant(1, 0.1)), f(Vector::Constant(1, 0.9)));
}

TEST(HolderTarget, LipschitzConstantOnGridPairs) {
  HolderTargetSpec s;
  s.zeta = 1.0;
  s.B = 1.0;
  s.d = 1;
  s.seed = 5;
  const HolderTarget f(s);
  EXPECT_LE(f.norm_bound(), 1.0);
  Rng rng(6);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double x = rng.uniform();
    const double y = rng.uniform();
    if (x == y) continue;
    worst = std::max(worst, std::abs(f(Vector::Constant(1, x)) - f(Vector::Constant(1, y))) /
                                std::abs(x - y));
  }
  EXPECT_LE(worst, 1.0 + 1e-6);
  double sup = 0.0;
  for (int k = 0; k <= 1000; ++k) sup = std::max(sup, std::abs(f(Vector::Constant(1, k / 1000.0))));
  EXPECT_LE(sup, 1.0 + 1e-12);
}

TEST(HolderTarget, FractionalQuotientOnGridPairs) {
  HolderTargetSpec s;
  s.zeta = 0.5;
  s.d = 2;
  s.seed = 7;
  const HolderTarget f(s);
  Rng rng(8);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    Vector x(2), y(2);
    x << rng.uniform(), rng.uniform();
    y << rng.uniform(), rng.uniform();
    const double dist = (x - y).cwiseAbs().maxCoeff();
    worst = std::max(worst, std::abs(f(x) - f(y)) / std::sqrt(dist));
  }
  EXPECT_LE(worst, 1.0 + 1e-6);
}

TEST(HolderTarget, SameSeedSameValues) {
  HolderTargetSpec s;
  s.d = 3;
  s.seed = 9;
  const HolderTarget a(s), b(s);
  const Matrix pts = halton_points(3, 50);
  for (int c = 0; c < 50; ++c) EXPECT_EQ(a(pts.col(c)), b(pts.col(c)));
  HolderTargetSpec bad = s;
  bad.zeta = 1.5;
  bad.s = 0;
  EXPECT_THROW(HolderTarget{bad}, InvalidInput);
}

TEST(SupError, MatchesExhaustiveLoop) {
  const Network net = Network::random(2, {6}, 1, 3);
  auto target = [](const Vector& x) { return std::sin(3 * x(0)) + x(1); };
  GridSpec g;
  g.resolution = 17;
  const SupError e = sup_error(net, target, g);
  double expect = 0.0;
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j) {
      Vector x(2);
      x << i / 16.0, j / 16.0;
      expect = std::max(expect, std::abs(forward(net, x)(0) - target(x)));
    }
  EXPECT_DOUBLE_EQ(e.value, expect);
  EXPECT_EQ(e.points, 289u);
  EXPECT_FALSE(e.lower_bound);
}

TEST(SupError, NetworkAgainstItselfIsZero) {
  const Network net = Network::random(3, {5, 5}, 1, 4);
  EXPECT_LE(sup_error(net, [&](const Vector& x) { return forward(net, x)(0); }).value, 1e-14);
  const Network wide = Network::random(5, {4}, 1, 5);
  GridSpec g;
  g.quasi_points = 500;
  EXPECT_TRUE(sup_error(wide, [](const Vector&) { return 0.0; }, g).lower_bound);
}

TEST(BoxCounting, Segment) {
  Matrix pts(3, 10000);
  for (int i = 0; i < 10000; ++i) {
    const double t = (i + 0.5) / 10000.0;
    pts.col(i) << 0.1 + 0.8 * t, 0.2 + 0.5 * t, 0.3 + 0.3 * t;
  }
  const auto est = box_counting_dimension(pts, geometric_scales(0.2, 0.005, 8));
  EXPECT_NEAR(est.dimension, 1.0, 0.15);
}

TEST(BoxCounting, FilledSquare) {
  Matrix pts = tensor_grid(2, 100);
  const auto est = box_counting_dimension(pts, geometric_scales(0.25, 0.02, 8));
  EXPECT_NEAR(est.dimension, 2.0, 0.2);
}

TEST(BoxCounting, CantorSet) {
  Rng rng(1);
  Matrix pts(1, 10000);
  const double cell = std::pow(3.0, -8);
  for (int i = 0; i < 10000; ++i) {
    double left = 0.0;
    double len = 1.0;
    for (int k = 0; k < 8; ++k) {
      len /= 3.0;
      if (rng.uniform() < 0.5) left += 2.0 * len;
    }
    pts(0, i) = left + cell * rng.uniform(0.25, 0.75);
  }
  std::vector<double> scales;
  for (int k = 1; k <= 6; ++k) scales.push_back(std::pow(3.0, -k));
  const auto est = box_counting_dimension(pts, scales);
  EXPECT_NEAR(est.dimension, std::log(2.0) / std::log(3.0), 0.1);
}

TEST(BoxCounting, PreconditionsAreChecked) {
  Matrix few = Matrix::Random(2, 50);
  EXPECT_THROW(box_counting_dimension(few, geometric_scales(0.5, 0.01, 5)), InvalidInput);
  Matrix many = tensor_grid(2, 20);
  EXPECT_THROW(box_counting_dimension(many, {0.5, 0.4, 0.3, 0.2}), InvalidInput);
  EXPECT_THROW(box_counting_dimension(many, {0.5, 0.1, 0.05}), InvalidInput);
}

TEST(ApproximationTrend, ReportsTheoryExponent) {
  HolderTargetSpec s;
  s.seed = 3;
  const HolderTarget f(s);
  GridSpec g;
  g.resolution = 129;
  const ApproxTrend t = approximation_trend(f, {4, 16}, 1, 33, {300, 0.05, 1.0, 0.0}, g, 1);
  ASSERT_EQ(t.points.size(), 2u);
  EXPECT_EQ(t.theory_exponent, -2.0);
  EXPECT_GE(t.points[0].sup_error, 0.0);
}

}  // namespace
}  // namespace pessim
