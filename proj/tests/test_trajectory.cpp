#include "pessim/trajectory.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pessim {
namespace {

using testing::make_mdp;
using testing::two_state_chain;

TEST(Sampling, TrajectoryChainsAndIsTimeOrdered) {
  Rng rng(1);
  const TabularMDP m = random_mdp({}, rng);
  const Policy mu = random_policy(4, 2, rng, 0.1);
  const Dataset ds = sample_trajectory(m, mu, 500, 7, 42);
  ASSERT_EQ(ds.size(), 500u);
  EXPECT_EQ(ds.burn_in, 7);
  for (std::size_t i = 0; i + 1 < ds.size(); ++i) {
    EXPECT_EQ(ds.transitions[i].s_next, ds.transitions[i + 1].s);
    EXPECT_EQ(ds.transitions[i].t + 1, ds.transitions[i + 1].t);
  }
  EXPECT_NO_THROW(ds.validate(4, 2));
}

TEST(Sampling, SameSeedIsBitIdentical) {
  Rng rng(2);
  const TabularMDP m = random_mdp({}, rng);
  const Policy mu = random_policy(4, 2, rng);
  const Dataset a = sample_trajectory(m, mu, 300, std::nullopt, 99);
  const Dataset b = sample_trajectory(m, mu, 300, std::nullopt, 99);
  EXPECT_EQ(a.transitions, b.transitions);
  const Dataset c = sample_trajectory(m, mu, 300, std::nullopt, 100);
  EXPECT_NE(a.transitions, c.transitions);
}

TEST(Sampling, SingleStateDeterministicRewardRepeats) {
  Matrix P(1, 1);
  P << 1.0;
  Matrix R(1, 1);
  R << 0.4;
  const TabularMDP m = make_mdp(1, 1, P, R, 0.9);
  const Dataset ds = sample_trajectory(m, Policy::uniform(1, 1), 50, 0, 3);
  for (const auto& t : ds.transitions) {
    EXPECT_EQ(t.s, 0);
    EXPECT_EQ(t.s_next, 0);
    EXPECT_EQ(t.r, 0.4);
  }
}

TEST(Sampling, SymmetricChainFrequencyMatchesStationary) {
  const TabularMDP m = two_state_chain(0.75, 0.75);
  const std::size_t n = 100000;
  const Dataset ds = sample_trajectory(m, Policy::uniform(2, 1), n, 100, 5);
  double ones = 0.0;
  for (const auto& t : ds.transitions) ones += t.s;
  const double freq = ones / n;
  // Asymptotic variance of the mean of an indicator on this chain:
  // var (1 + lambda) / (1 - lambda) with lambda = 0.5.
  const double se = std::sqrt(0.25 * 3.0 / n);
  EXPECT_LE(std::abs(freq - 0.5), 3.0 * se);
}

TEST(Sampling, RejectsBurnInOnNonErgodicChain) {
  Matrix P(2, 2);
  P << 1, 0, 0, 1;
  Matrix R = Matrix::Zero(2, 1);
  const TabularMDP m = make_mdp(2, 1, P, R, 0.9);
  EXPECT_THROW(sample_trajectory(m, Policy::uniform(2, 1), 10, 5, 1), InvalidInput);
  EXPECT_NO_THROW(sample_trajectory(m, Policy::uniform(2, 1), 10, 0, 1));
  EXPECT_THROW(sample_trajectory(m, Policy::uniform(2, 1), 0, 0, 1), InvalidInput);
}

TEST(Sampling, ValidateCatchesBrokenChain) {
  Dataset ds;
  ds.transitions = {{0, 0, 0.0, 1, 0}, {0, 0, 0.0, 1, 1}};
  EXPECT_THROW(ds.validate(2, 1), InvalidInput);
  ds.transitions = {{0, 0, 0.0, 1, 5}, {1, 0, 0.0, 1, 5}};
  EXPECT_THROW(ds.validate(2, 1), InvalidInput);
}

TEST(SpectralGap, KnownChains) {
  EXPECT_NEAR(spectral_gap(two_state_chain(0.75, 0.75), Policy::uniform(2, 1)), 0.5, 1e-12);
  // Analytic: second eigenvalue of [[1-p, p], [q, 1-q]] is 1 - p - q.
  EXPECT_NEAR(spectral_gap(two_state_chain(0.9, 0.6), Policy::uniform(2, 1)), 0.5, 1e-12);
  Matrix rank_one(3, 3);
  rank_one << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
  EXPECT_NEAR(second_eigenvalue_modulus(rank_one), 0.0, 1e-12);
}

TEST(SpectralGap, MatchesDeflatedPowerIteration) {
  // Symmetric doubly-stochastic kernel: real spectrum, so deflating the
  // uniform eigenvector and iterating recovers |lambda_2| cleanly.
  Rng rng(6);
  const int n = 5;
  Matrix W = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) W(i, j) = W(j, i) = rng.uniform(0.1, 1.0);
  // Sinkhorn to doubly stochastic while keeping symmetry.
  for (int it = 0; it < 5000; ++it) {
    const Vector r = W.rowwise().sum();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) W(i, j) /= std::sqrt(r(i) * r(j));
  }
  const Vector ones = Vector::Constant(n, 1.0 / std::sqrt(n));
  Vector v = Vector::LinSpaced(n, 1.0, 2.0);
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    v -= ones * ones.dot(v);
    Vector w = W * v;
    lambda = w.norm() / v.norm();
    v = w / w.norm();
  }
  EXPECT_NEAR(second_eigenvalue_modulus(W), lambda, 1e-8);
}

TEST(Autocorrelation, LagZeroIsVariance) {
  std::vector<double> x = {1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1, 0};
  const auto prof = autocovariance(x, 2);
  double m = 0.0;
  for (double v : x) m += v;
  m /= x.size();
  double var = 0.0;
  for (double v : x) var += (v - m) * (v - m);
  var /= x.size();
  EXPECT_NEAR(prof.points[0].value, var, 1e-15);
  EXPECT_EQ(prof.variance, prof.points[0].value);
}

TEST(Autocorrelation, TooShortIsRejected) {
  std::vector<double> x(20, 0.5);
  EXPECT_THROW(autocovariance(x, 5), InvalidInput);
}

TEST(Autocorrelation, ShuffledSurrogateIsUncorrelated) {
  const TabularMDP m = two_state_chain(0.75, 0.75);
  Dataset ds = sample_trajectory(m, Policy::uniform(2, 1), 40000, 50, 8);
  std::vector<double> series;
  for (const auto& t : ds.transitions) series.push_back(t.s == 0 ? 1.0 : 0.0);
  std::shuffle(series.begin(), series.end(), Rng(9).engine());
  const auto prof = autocovariance(series, 10);
  for (int k = 1; k <= 10; ++k)
    EXPECT_LT(std::abs(prof.points[k].value / prof.variance), 4.0 / std::sqrt(40000.0));
}

TEST(Autocorrelation, TwoStateChainDecaysGeometrically) {
  const TabularMDP m = two_state_chain(0.75, 0.75);
  const std::size_t n = 200000;
  const Dataset ds = sample_trajectory(m, Policy::uniform(2, 1), n, 50, 10);
  const auto prof = autocorrelation_profile(ds, Probe::parse("state:0"), 6);
  for (int k = 1; k <= 6; ++k) {
    const double expect = prof.variance * std::pow(0.5, k);
    // Bartlett-style standard error for a geometric autocovariance.
    const double se = 0.25 * std::sqrt(3.0 / n) * 2.0;
    EXPECT_LE(std::abs(prof.points[k].value - expect), 3.0 * se) << "lag " << k;
  }
}

TEST(MixingFit, RecoversNoiselessExponential) {
  AutocorrelationProfile prof;
  prof.sample_size = 1000000;
  prof.variance = 0.9;
  prof.noise_floor = 1e-12;
  for (int k = 0; k <= 20; ++k) prof.points.push_back({k, 0.9 * std::exp(-0.7 * k)});
  const MixingFit fit = fit_mixing_rate(prof);
  EXPECT_FALSE(fit.effectively_independent);
  EXPECT_EQ(fit.params.eta, 1.0);
  EXPECT_NEAR(fit.params.b, 0.7, 1e-6);
  EXPECT_NEAR(fit.params.c, 0.9, 1e-6);
}

TEST(MixingFit, WhiteNoiseIsFlaggedIndependent) {
  Rng rng(11);
  std::vector<double> x(20000);
  for (double& v : x) v = rng.uniform();
  const MixingFit fit = fit_mixing_rate(autocovariance(x, 20));
  EXPECT_TRUE(fit.effectively_independent);
}

TEST(MixingFit, TwoStateChainRate) {
  const TabularMDP m = two_state_chain(0.75, 0.75);
  const Dataset ds = sample_trajectory(m, Policy::uniform(2, 1), 100000, 50, 12);
  const MixingFit fit = fit_mixing_rate(autocorrelation_profile(ds, Probe::parse("state:0"), 30));
  EXPECT_EQ(fit.params.eta, 1.0);
  EXPECT_NEAR(fit.params.b, std::log(2.0), 0.2 * std::log(2.0));
}

TEST(Probe, ParseAndName) {
  EXPECT_EQ(Probe::parse("state:3").id(), "state:3");
  EXPECT_EQ(Probe::parse("reward").kind, Probe::Kind::kReward);
  EXPECT_EQ(Probe::parse("coord:1").index, 1);
  EXPECT_THROW(Probe::parse("bogus"), InvalidInput);
}

TEST(Embedding, GridCornersForFourPairs) {
  const Matrix t = embedding_table({EmbedSpec::Kind::kGrid, 2}, 2, 2);
  Matrix expect(2, 4);
  expect << 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.25, 0.75;
  EXPECT_LT((t - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Embedding, CurvePointsInvertToTheirParameter) {
  const int d = 5;
  const Matrix t = embedding_table({EmbedSpec::Kind::kCurve, d}, 4, 2);
  for (int k = 0; k < t.cols(); ++k) {
    const double param = t(0, k);
    EXPECT_LT((curve_point(param, d) - t.col(k)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_TRUE((t.col(k).array() >= 0.0).all() && (t.col(k).array() <= 1.0).all());
  }
}

TEST(Embedding, OneHotAndErrors) {
  const Matrix t = embedding_table({EmbedSpec::Kind::kOneHot, 6}, 3, 2);
  EXPECT_EQ(t.topRows(6), Matrix::Identity(6, 6));
  EXPECT_THROW(embedding_table({EmbedSpec::Kind::kOneHot, 3}, 3, 2), InvalidInput);
  EXPECT_THROW(embedding_table({EmbedSpec::Kind::kGrid, 3}, 3, 2), InvalidInput);
  EXPECT_THROW(EmbedSpec::parse("spiral", 2), InvalidInput);
}

TEST(Embedding, DatasetPointsFollowTable) {
  Rng rng(13);
  const TabularMDP m = random_mdp({}, rng);
  const Dataset ds = sample_trajectory(m, Policy::uniform(4, 2), 100, 0, 14);
  const EmbeddedDataset e = embed_dataset(ds, m, {EmbedSpec::Kind::kGrid, 2});
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& tr = ds.transitions[k];
    EXPECT_EQ(e.points.col(static_cast<Eigen::Index>(k)), e.table.col(m.index(tr.s, tr.a)));
  }
}

TEST(Serialization, CsvRoundTripAndSidecar) {
  Rng rng(15);
  const TabularMDP m = random_mdp({}, rng);
  const Dataset ds = sample_trajectory(m, Policy::uniform(4, 2), 200, 3, 16, "uniform");
  std::stringstream io;
  write_dataset_csv(ds, io);
  const Dataset back = read_dataset_csv(io);
  EXPECT_EQ(back.transitions, ds.transitions);
  const nlohmann::json side = dataset_sidecar(ds, EmbedSpec{EmbedSpec::Kind::kGrid, 2});
  EXPECT_EQ(side.at("seed").get<std::uint64_t>(), 16u);
  EXPECT_EQ(side.at("behavior_ref").get<std::string>(), "uniform");
}

}  // namespace
}  // namespace pessim
