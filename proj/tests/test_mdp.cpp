#include "pessim/mdp.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>

namespace pessim {
namespace {

using testing::loop_bellman;
using testing::make_mdp;
using testing::series_occupancy;
using testing::two_state_chain;
using testing::value_iteration;

TEST(BellmanApply, NearZeroDiscountReturnsRewardTable) {
  Rng rng(1);
  RandomMdpOptions o;
  o.num_states = 3;
  o.gamma = 1e-9;
  const TabularMDP m = random_mdp(o, rng);
  const Policy pi = random_policy(3, 2, rng);
  const QFunction q = random_q(3, 2, rng, 0.0, 5.0);
  const QFunction out = bellman_apply(m, pi, q);
  EXPECT_LT((out.values - m.reward_mean()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BellmanApply, ConstantInputAddsDiscountedConstant) {
  Rng rng(2);
  const TabularMDP m = random_mdp({}, rng);
  const Policy pi = random_policy(4, 2, rng);
  const QFunction out = bellman_apply(m, pi, QFunction::constant(4, 2, 3.0));
  const Matrix expect = m.reward_mean().array() + m.gamma() * 3.0;
  EXPECT_LT((out.values - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BellmanApply, MatchesNestedLoops) {
  Rng rng(3);
  RandomMdpOptions o;
  o.num_states = 3;
  for (int i = 0; i < 20; ++i) {
    const TabularMDP m = random_mdp(o, rng);
    const Policy pi = random_policy(3, 2, rng);
    const QFunction q = random_q(3, 2, rng, -2.0, 2.0);
    const Matrix expect = loop_bellman(m, pi, q.values);
    EXPECT_LT((bellman_apply(m, pi, q).values - expect).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(BellmanApply, RejectsShapeMismatch) {
  Rng rng(4);
  const TabularMDP m = random_mdp({}, rng);
  EXPECT_THROW(bellman_apply(m, Policy::uniform(3, 2), QFunction::zeros(4, 2)), InvalidInput);
  EXPECT_THROW(bellman_apply(m, Policy::uniform(4, 2), QFunction::zeros(4, 3)), InvalidInput);
}

TEST(BellmanApply, SupNormContraction) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    RandomMdpOptions o;
    o.num_states = 2 + static_cast<int>(rng.index(7));
    o.num_actions = 1 + static_cast<int>(rng.index(4));
    o.gamma = rng.uniform(0.05, 0.99);
    const TabularMDP m = random_mdp(o, rng);
    const Policy pi = random_policy(o.num_states, o.num_actions, rng);
    const QFunction q1 = random_q(o.num_states, o.num_actions, rng, -10, 10);
    const QFunction q2 = random_q(o.num_states, o.num_actions, rng, -10, 10);
    const double lhs =
        (bellman_apply(m, pi, q1).values - bellman_apply(m, pi, q2).values).cwiseAbs().maxCoeff();
    const double rhs = m.gamma() * (q1.values - q2.values).cwiseAbs().maxCoeff();
    EXPECT_LE(lhs, rhs + 1e-12);
  }
}

TEST(FixedPoint, SingleStateGeometricSeries) {
  Matrix P(1, 1);
  P << 1.0;
  Matrix R(1, 1);
  R << 1.0;
  const TabularMDP m = make_mdp(1, 1, P, R, 0.5);
  EXPECT_NEAR(q_fixed_point(m, Policy::uniform(1, 1)).values(0, 0), 2.0, 1e-14);
}

TEST(FixedPoint, ZeroRewardGivesZero) {
  Rng rng(6);
  const TabularMDP base = random_mdp({}, rng);
  const TabularMDP m(4, 2, base.transition(), Matrix::Zero(4, 2), Matrix::Zero(4, 2), 0.9,
                     base.initial_dist(), 1.0);
  EXPECT_EQ(q_fixed_point(m, Policy::uniform(4, 2)).values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FixedPoint, MatchesValueIteration) {
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    const TabularMDP m = random_mdp({}, rng);
    const Policy pi = random_policy(4, 2, rng);
    const Matrix vi = value_iteration(m, pi);
    const QFunction q = q_fixed_point(m, pi);
    EXPECT_LT((q.values - vi).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((bellman_apply(m, pi, q).values - q.values).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(FixedPoint, ValueIterationFromTwoStartsAgrees) {
  Rng rng(8);
  const TabularMDP m = random_mdp({}, rng);
  const Policy pi = random_policy(4, 2, rng);
  Matrix a = random_q(4, 2, rng, -50, 50).values;
  Matrix b = random_q(4, 2, rng, -50, 50).values;
  for (int it = 0; it < 2000; ++it) {
    a = loop_bellman(m, pi, a);
    b = loop_bellman(m, pi, b);
  }
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PolicyValue, ConstantRewardGivesGeometricSum) {
  Rng rng(9);
  const TabularMDP base = random_mdp({}, rng);
  const TabularMDP m(4, 2, base.transition(), Matrix::Constant(4, 2, 0.3), Matrix::Zero(4, 2),
                     0.8, base.initial_dist(), 1.0);
  EXPECT_NEAR(value_of_policy(m, random_policy(4, 2, rng)), 0.3 / 0.2, 1e-12);
}

TEST(PolicyValue, MatchesRolloutAverage) {
  Rng rng(10);
  RandomMdpOptions o;
  o.num_states = 3;
  o.gamma = 0.7;
  const TabularMDP m = random_mdp(o, rng);
  const Policy pi = random_policy(3, 2, rng);
  const double exact = value_of_policy(m, pi);
  constexpr int kRollouts = 100000;
  constexpr int kHorizon = 80;
  double sum = 0.0;
  double sq = 0.0;
  Rng sim(11);
  for (int k = 0; k < kRollouts; ++k) {
    int s = static_cast<int>(sim.categorical(m.initial_dist()));
    double ret = 0.0;
    double w = 1.0;
    for (int t = 0; t < kHorizon; ++t) {
      const int a = static_cast<int>(sim.categorical(pi.probs().row(s)));
      ret += w * (m.reward_mean()(s, a) + m.reward_noise()(s, a) * sim.uniform(-1.0, 1.0));
      w *= m.gamma();
      s = static_cast<int>(sim.categorical(m.transition().row(m.index(s, a))));
    }
    sum += ret;
    sq += ret * ret;
  }
  const double avg = sum / kRollouts;
  const double se = std::sqrt((sq / kRollouts - avg * avg) / kRollouts);
  EXPECT_LE(std::abs(avg - exact), 3.0 * se + 1e-9);
}

TEST(Occupancy, SingleStateIsPolicy) {
  Matrix P(2, 1);
  P << 1.0, 1.0;
  Matrix R(1, 2);
  R << 0.1, 0.5;
  const TabularMDP m = make_mdp(1, 2, P, R, 0.9);
  Matrix probs(1, 2);
  probs << 0.3, 0.7;
  const Policy pi(probs);
  EXPECT_LT((discounted_occupancy(m, pi).mass - probs).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((stationary_occupancy(m, pi).mass - probs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Occupancy, MyopicLimitIsInitialTimesPolicy) {
  Rng rng(12);
  RandomMdpOptions o;
  o.gamma = 1e-9;
  const TabularMDP m = random_mdp(o, rng);
  const Policy pi = random_policy(4, 2, rng);
  const Matrix expect = m.initial_dist().asDiagonal() * pi.probs();
  EXPECT_LT((discounted_occupancy(m, pi).mass - expect).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Occupancy, DiscountedMatchesPowerSeries) {
  Rng rng(13);
  for (int i = 0; i < 5; ++i) {
    const TabularMDP m = random_mdp({}, rng);
    const Policy pi = random_policy(4, 2, rng);
    const OccupancyDist d = discounted_occupancy(m, pi);
    EXPECT_EQ(d.kind, OccupancyKind::kDiscounted);
    EXPECT_NEAR(d.mass.sum(), 1.0, 1e-12);
    EXPECT_LT((d.mass - series_occupancy(m, pi)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Occupancy, StationaryOfSymmetricChainIsUniform) {
  const TabularMDP m = two_state_chain(0.75, 0.75);
  const OccupancyDist d = stationary_occupancy(m, Policy::uniform(2, 1));
  EXPECT_NEAR(d.mass(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(d.mass(1, 0), 0.5, 1e-14);
}

TEST(Occupancy, StationaryMatchesPowerIteration) {
  Rng rng(14);
  const TabularMDP m = random_mdp({}, rng);
  const Policy pi = random_policy(4, 2, rng);
  const Matrix K = pair_transition(m, pi);
  Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(8, 1.0 / 8);
  for (int it = 0; it < 5000; ++it) x = x * K;
  const OccupancyDist d = stationary_occupancy(m, pi);
  EXPECT_EQ(d.kind, OccupancyKind::kStationary);
  EXPECT_LT((d.flat() - x.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Occupancy, StationaryMatchesLongRunFrequency) {
  Rng rng(15);
  RandomMdpOptions o;
  o.num_states = 3;
  const TabularMDP m = random_mdp(o, rng);
  const Policy pi = random_policy(3, 2, rng, 0.1);
  const Vector d = stationary_occupancy(m, pi).flat();
  constexpr int kSteps = 1000000;
  Vector counts = Vector::Zero(6);
  Rng sim(16);
  int s = 0;
  for (int t = 0; t < kSteps; ++t) {
    const int a = static_cast<int>(sim.categorical(pi.probs().row(s)));
    counts(m.index(s, a)) += 1.0;
    s = static_cast<int>(sim.categorical(m.transition().row(m.index(s, a))));
  }
  // Generous standard error: the chain mixes fast but samples are correlated.
  for (int c = 0; c < 6; ++c) {
    const double freq = counts(c) / kSteps;
    const double se = std::sqrt(d(c) * (1.0 - d(c)) / kSteps);
    EXPECT_LE(std::abs(freq - d(c)), 3.0 * 4.0 * se) << "cell " << c;
  }
}

TEST(Occupancy, StationaryRejectsReducibleChain) {
  Matrix P(2, 2);
  P << 1.0, 0.0, 0.0, 1.0;
  Matrix R(2, 1);
  R << 0.0, 0.0;
  const TabularMDP m = make_mdp(2, 1, P, R, 0.9);
  EXPECT_THROW(stationary_occupancy(m, Policy::uniform(2, 1)), InvalidInput);
}

TEST(Concentrability, IdenticalPoliciesGiveOne) {
  Rng rng(17);
  const TabularMDP m = random_mdp({}, rng);
  const Policy mu = random_policy(4, 2, rng, 0.1);
  for (OccupancyKind k : {OccupancyKind::kDiscounted, OccupancyKind::kStationary}) {
    const Concentrability c = concentrability(m, mu, mu, k);
    EXPECT_TRUE(c.finite);
    EXPECT_NEAR(c.value, 1.0, 1e-12);
  }
}

TEST(Concentrability, AtLeastOneAndEqualsEnumeration) {
  Rng rng(18);
  RandomMdpOptions o;
  o.num_states = 2;
  for (int i = 0; i < 10; ++i) {
    const TabularMDP m = random_mdp(o, rng);
    const Policy pi = random_policy(2, 2, rng);
    const Policy mu = random_policy(2, 2, rng, 0.05);
    const Matrix dp = series_occupancy(m, pi);
    const Matrix dm = series_occupancy(m, mu);
    double best = 0.0;
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) best = std::max(best, dp(s, a) / dm(s, a));
    const Concentrability c = concentrability(m, pi, mu, OccupancyKind::kDiscounted);
    EXPECT_GE(c.value, 1.0 - 1e-12);
    EXPECT_NEAR(c.value, best, 1e-9 * best);
  }
}

TEST(Concentrability, MissingSupportIsFlaggedInfinite) {
  Rng rng(19);
  const TabularMDP m = random_mdp({}, rng);
  const Policy mu = Policy::deterministic(2, {0, 0, 0, 0});
  const Policy pi = Policy::uniform(4, 2);
  const Concentrability c = concentrability(m, pi, mu, OccupancyKind::kDiscounted);
  EXPECT_FALSE(c.finite);
  EXPECT_TRUE(std::isinf(c.value));
}

TEST(PerformanceDifference, ResidualsVanish) {
  Rng rng(20);
  for (int i = 0; i < 30; ++i) {
    RandomMdpOptions o;
    o.num_states = 3;
    o.gamma = rng.uniform(0.1, 0.95);
    const TabularMDP m = random_mdp(o, rng);
    const Policy mu = random_policy(3, 2, rng);
    const Policy pi = random_policy(3, 2, rng);
    const Policy pp = random_policy(3, 2, rng);
    const QFunction f = random_q(3, 2, rng, 0.0, m.v_max());
    EXPECT_LT(performance_difference_residual(m, mu, pi), 1e-8);
    EXPECT_LT(performance_difference_residual(m, pi, pi), 1e-12);
    EXPECT_LT(general_pd_residual(m, pi, pp, f), 1e-8);
    EXPECT_LT(general_pd_residual(m, pi, pp, QFunction::zeros(3, 2)), 1e-12);
    EXPECT_LT(general_pd_residual(m, pi, pi, q_fixed_point(m, pi)), 1e-12);
  }
}

TEST(PerformanceDifference, IndependentOracle) {
  // J(mu) - J(pi) computed from separate linear solves; expectation under the
  // power-series occupancy.
  Rng rng(21);
  RandomMdpOptions o;
  o.num_states = 3;
  const TabularMDP m = random_mdp(o, rng);
  const Policy mu = random_policy(3, 2, rng);
  const Policy pi = random_policy(3, 2, rng);
  const Matrix qpi = value_iteration(m, pi);
  auto J = [&](const Policy& p) {
    const Matrix q = value_iteration(m, p);
    double acc = 0.0;
    for (int s = 0; s < 3; ++s) acc += m.initial_dist()(s) * p.probs().row(s).dot(q.row(s));
    return acc;
  };
  const Matrix dmu = series_occupancy(m, mu);
  double adv = 0.0;
  for (int s = 0; s < 3; ++s) {
    const double vpi = pi.probs().row(s).dot(qpi.row(s));
    for (int a = 0; a < 2; ++a) adv += dmu(s, a) * (qpi(s, a) - vpi);
  }
  EXPECT_NEAR(J(mu) - J(pi), adv / (1.0 - m.gamma()), 1e-9);
}

TEST(ChainStructure, DetectsPeriodAndClasses) {
  Matrix flip(2, 2);
  flip << 0, 1, 1, 0;
  EXPECT_EQ(analyze_chain(flip).period, 2);
  EXPECT_FALSE(analyze_chain(flip).ergodic());
  Matrix split = Matrix::Identity(3, 3);
  EXPECT_EQ(analyze_chain(split).closed_classes, 3);
  Matrix mix(2, 2);
  mix << 0.5, 0.5, 0.2, 0.8;
  EXPECT_TRUE(analyze_chain(mix).ergodic());
}

TEST(Validation, RejectsMalformedTables) {
  Matrix P(2, 2);
  P << 0.6, 0.5, 0.5, 0.5;
  Matrix R = Matrix::Zero(2, 1);
  EXPECT_THROW(make_mdp(2, 1, P, R, 0.9), InvalidInput);
  P << 0.5, 0.5, 0.5, 0.5;
  EXPECT_THROW(make_mdp(2, 1, P, R, 1.0), InvalidInput);
  EXPECT_THROW(make_mdp(2, 1, P, Matrix::Constant(2, 1, 2.0), 0.9), InvalidInput);
  Matrix bad(1, 2);
  bad << 0.7, 0.7;
  EXPECT_THROW(Policy{bad}, InvalidInput);
}

TEST(Serialization, JsonRoundTrip) {
  Rng rng(22);
  const TabularMDP m = random_mdp({}, rng);
  const TabularMDP back = mdp_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.transition(), m.transition());
  EXPECT_EQ(back.reward_mean(), m.reward_mean());
  EXPECT_EQ(back.reward_noise(), m.reward_noise());
  EXPECT_EQ(back.initial_dist(), m.initial_dist());
  EXPECT_EQ(back.gamma(), m.gamma());
  const Policy pi = random_policy(4, 2, rng);
  EXPECT_EQ(policy_from_json(to_json(pi)).probs(), pi.probs());
}

TEST(Serialization, CorruptedRowSumRejected) {
  Rng rng(23);
  nlohmann::json doc = to_json(random_mdp({}, rng));
  doc["transition"][0][0] = doc["transition"][0][0].get<double>() + 0.1;
  EXPECT_THROW(mdp_from_json(doc), InvalidInput);
}

TEST(Generators, StationaryInitialMakesOccupanciesEqual) {
  Rng rng(24);
  const TabularMDP base = random_mdp({}, rng);
  const Policy mu = random_policy(4, 2, rng, 0.1);
  const TabularMDP m = with_stationary_initial(base, mu);
  EXPECT_LT((discounted_occupancy(m, mu).mass - stationary_occupancy(m, mu).mass)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

}  // namespace
}  // namespace pessim
