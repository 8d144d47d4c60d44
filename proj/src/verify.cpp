#include "pessim/verify.hpp"

#include "pessim/bellman.hpp"
#include "pessim/bounds.hpp"
#include "pessim/config.hpp"
#include "pessim/solver.hpp"
#include "pessim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace pessim {

namespace {

constexpr std::size_t kMaxFailures = 10;

/// Random MDPs unless the caller pinned one document for every instance.
class MdpSource {
 public:
  explicit MdpSource(const std::optional<TabularMDP>& fixed) : fixed_(fixed) {}

  TabularMDP next(const RandomMdpOptions& opts, Rng& rng) const {
    return fixed_ ? *fixed_ : random_mdp(opts, rng);
  }

 private:
  std::optional<TabularMDP> fixed_;
};

RandomMdpOptions random_sizes(Rng& rng, int max_states, int max_actions, double gamma_lo,
                              double gamma_hi) {
  RandomMdpOptions o;
  o.num_states = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(max_states - 1)));
  o.num_actions = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(max_actions - 1)));
  o.gamma = rng.uniform(gamma_lo, gamma_hi);
  return o;
}

nlohmann::json describe(const TabularMDP& mdp, std::uint64_t seed) {
  return {{"states", mdp.num_states()}, {"actions", mdp.num_actions()},
          {"gamma", mdp.gamma()}, {"seed", seed}};
}

SuiteResult named(std::string name) {
  SuiteResult r;
  r.name = std::move(name);
  return r;
}

void record_failure(SuiteResult& r, nlohmann::json instance) {
  r.status = SuiteStatus::kFail;
  if (r.failures.size() < kMaxFailures) r.failures.push_back(std::move(instance));
}

Policy mix(const Policy& a, const Policy& b, double t) {
  return Policy(((1.0 - t) * a.probs() + t * b.probs()).eval());
}

// ---------------------------------------------------------------------------

SuiteResult contraction_suite(const MdpSource& src, std::uint64_t seed) {
  SuiteResult r = named("contraction");
  r.metric = "max of |T q1 - T q2|_inf - gamma |q1 - q2|_inf";
  r.worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const TabularMDP mdp = src.next(random_sizes(rng, 8, 4, 0.5, 0.99), rng);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    for (int k = 0; k < 10; ++k) {
      const Policy pi = random_policy(S, A, rng);
      const QFunction q1 = random_q(S, A, rng, -mdp.v_max(), mdp.v_max());
      const QFunction q2 = random_q(S, A, rng, -mdp.v_max(), mdp.v_max());
      const double lhs = (bellman_apply(mdp, pi, q1).values - bellman_apply(mdp, pi, q2).values)
                             .cwiseAbs()
                             .maxCoeff();
      const double rhs = mdp.gamma() * (q1.values - q2.values).cwiseAbs().maxCoeff();
      ++r.instances;
      r.worst = std::max(r.worst, lhs - rhs);
      if (lhs > rhs + 1e-12) record_failure(r, {{"mdp", describe(mdp, s)}, {"lhs", lhs}, {"rhs", rhs}});
    }
  }
  return r;
}

SuiteResult pd_suite(const MdpSource& src, std::uint64_t seed) {
  SuiteResult r = named("pd-identities");
  r.metric = "max residual of both performance-difference identities";
  double worst_pd = 0.0;
  double worst_gen = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const TabularMDP mdp = src.next(random_sizes(rng, 8, 4, 0.5, 0.99), rng);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const Policy mu = random_policy(S, A, rng);
    const Policy pi = random_policy(S, A, rng);
    const Policy pi2 = random_policy(S, A, rng);
    const QFunction f = random_q(S, A, rng, 0.0, mdp.v_max());
    const double a = performance_difference_residual(mdp, mu, pi);
    const double b = general_pd_residual(mdp, pi, pi2, f);
    worst_pd = std::max(worst_pd, a);
    worst_gen = std::max(worst_gen, b);
    ++r.instances;
    if (a >= 1e-8 || b >= 1e-8)
      record_failure(r, {{"mdp", describe(mdp, s)}, {"pd", a}, {"general_pd", b}});
  }
  r.worst = std::max(worst_pd, worst_gen);
  r.details = {{"performance_difference", worst_pd}, {"general_performance_difference", worst_gen}};
  return r;
}

SuiteResult decomposition_suite(const MdpSource& src, std::uint64_t seed) {
  SuiteResult r = named("loss-decomposition");
  r.metric = "max residual of the loss decomposition identity";
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const TabularMDP mdp = src.next(random_sizes(rng, 8, 4, 0.5, 0.99), rng);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const Policy mu = random_policy(S, A, rng);
    const Policy pi = random_policy(S, A, rng);
    const QFunction f1 = random_q(S, A, rng, 0.0, mdp.v_max());
    const QFunction f2 = i % 4 == 0 ? q_fixed_point(mdp, pi) : random_q(S, A, rng, 0.0, mdp.v_max());
    const double res = loss_decomposition_residual(mdp, mu, pi, f1, f2);
    r.worst = std::max(r.worst, res);
    ++r.instances;
    if (res >= 1e-8) record_failure(r, {{"mdp", describe(mdp, s)}, {"residual", res}});
  }
  return r;
}

SuiteResult l1_contraction_suite(const MdpSource& src, std::uint64_t seed) {
  SuiteResult r = named("l1-contraction");
  r.metric = "max lhs / rhs over instances with gamma C < 1";
  nlohmann::json per_kind = nlohmann::json::object();
  for (OccupancyKind kind : {OccupancyKind::kDiscounted, OccupancyKind::kStationary}) {
    int used = 0;
    int skipped = 0;
    double worst = 0.0;
    for (int i = 0; used < 100 && i < 5000; ++i) {
      const std::uint64_t s = derive_seed(seed ^ static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(i));
      Rng rng(s);
      const TabularMDP mdp = src.next(random_sizes(rng, 8, 4, 0.05, 0.9), rng);
      const int S = mdp.num_states();
      const int A = mdp.num_actions();
      const Policy mu = random_policy(S, A, rng, 0.05);
      const Policy phi = mix(mu, random_policy(S, A, rng), 0.1);
      const QFunction f = random_q(S, A, rng, 0.0, mdp.v_max());
      try {
        const InequalityCheck c = l1_contraction_check(mdp, occupancy(mdp, mu, kind), phi, f);
        ++used;
        if (c.rhs > 0.0) worst = std::max(worst, c.lhs / c.rhs);
        if (!c.holds) record_failure(r, {{"mdp", describe(mdp, s)}, {"check", to_json(c)}});
      } catch (const InvalidInput&) {
        ++skipped;
      }
    }
    r.instances += static_cast<std::size_t>(used);
    r.worst = std::max(r.worst, worst);
    per_kind[to_string(kind)] = {{"instances", used}, {"skipped_vacuous", skipped},
                                 {"worst_ratio", worst}};
    if (used < 100) {
      r.status = SuiteStatus::kFail;
      r.message = "fewer than 100 instances satisfied gamma C < 1";
    }
  }
  r.details = per_kind;
  return r;
}

SuiteResult drift_suite(const MdpSource& src, std::uint64_t seed) {
  SuiteResult r = named("fixed-point-drift");
  r.metric = "max lhs / rhs";
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const TabularMDP mdp = src.next(random_sizes(rng, 8, 4, 0.1, 0.99), rng);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const OccupancyDist rho = discounted_occupancy(mdp, random_policy(S, A, rng, 0.05));
    const Policy pi = random_policy(S, A, rng);
    const Policy other = random_policy(S, A, rng);
    // Perturbation sized to keep the distance within 0.1 (1 - gamma).
    const double full = policy_distance(rho, other, pi);
    const double t = full > 0.0 ? std::min(1.0, 0.1 * (1.0 - mdp.gamma()) / full) * rng.uniform() : 0.0;
    const Policy phi = mix(pi, other, t);
    const InequalityCheck c = fixed_point_drift_check(mdp, rho, phi, pi);
    ++r.instances;
    if (c.rhs > 0.0) r.worst = std::max(r.worst, c.lhs / c.rhs);
    if (!c.holds) record_failure(r, {{"mdp", describe(mdp, s)}, {"check", to_json(c)}});
  }
  return r;
}

SuiteResult unbiasedness_suite(std::uint64_t seed) {
  SuiteResult r = named("unbiasedness");
  r.metric = "max |mean E_D - E_mu| / standard error";
  Rng rng(derive_seed(seed, 4));
  RandomMdpOptions o;
  const TabularMDP base = random_mdp(o, rng);
  const Policy mu = random_policy(o.num_states, o.num_actions, rng, 0.15);
  const TabularMDP mdp = with_stationary_initial(base, mu);
  const OccupancyDist rho = stationary_occupancy(mdp, mu);
  constexpr int kDatasets = 10000;
  constexpr std::size_t kSize = 200;
  nlohmann::json pairs = nlohmann::json::array();
  for (int k = 0; k < 5; ++k) {
    const Policy pi = random_policy(o.num_states, o.num_actions, rng);
    const QFunction f = random_q(o.num_states, o.num_actions, rng, 0.0, mdp.v_max());
    const double truth = population_bellman_error(mdp, rho, pi, f).value;
    std::vector<double> values(kDatasets);
    Vector nonempty = Vector::Zero(mdp.num_pairs());
    for (int j = 0; j < kDatasets; ++j) {
      const Dataset ds = sample_trajectory(mdp, mu, kSize, std::nullopt,
                                           derive_seed(seed, 1000000ULL * (k + 1) + j));
      values[static_cast<std::size_t>(j)] = empirical_bellman_error(ds, mdp, pi, f).value;
      const EmpiricalModel m = empirical_model(ds, mdp.num_states(), mdp.num_actions());
      for (int c = 0; c < mdp.num_pairs(); ++c) nonempty(c) += m.count(c) > 0 ? 1.0 : 0.0;
    }
    nonempty /= kDatasets;
    const double avg = mean(values);
    const double se = stddev(values) / std::sqrt(static_cast<double>(kDatasets));
    // Finite-sample bias of the tabular inner minimum: sum_sa Var(y|sa) P(cell seen) / n.
    const Vector v = state_values(f, pi);
    double predicted = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s) {
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const int c = mdp.index(s, a);
        const Vector p = mdp.transition().row(c).transpose();
        const double m1 = p.dot(v);
        const double var_next = p.dot(v.cwiseProduct(v)) - m1 * m1;
        const double w = mdp.reward_noise()(s, a);
        const double var_y = w * w / 3.0 + mdp.gamma() * mdp.gamma() * var_next;
        predicted += var_y * nonempty(c) / static_cast<double>(kSize);
      }
    }
    const double z = std::abs(avg - truth) / se;
    r.worst = std::max(r.worst, z);
    ++r.instances;
    nlohmann::json row = {{"pair", k},
                          {"mean_empirical", avg},
                          {"population", truth},
                          {"standard_error", se},
                          {"z", z},
                          {"predicted_bias", predicted},
                          {"z_after_predicted_bias", std::abs(avg - truth - predicted) / se}};
    pairs.push_back(row);
    if (z > 3.0) record_failure(r, row);
  }
  r.details = {{"pairs", pairs}, {"datasets", kDatasets}, {"dataset_size", kSize}};
  if (r.status == SuiteStatus::kFail)
    r.message = "the tabular inner minimum overfits each cell, biasing E_D upward by about "
                "sum_sa Var(y|sa) P(cell seen) / n (see predicted_bias)";
  return r;
}

SuiteResult oracle_agreement_suite(std::uint64_t seed) {
  SuiteResult r = named("oracle-agreement");
  r.metric = "max relative error (projected gradient vs closed form; adversarial vs oracle)";
  Rng rng(derive_seed(seed, 5));
  int inactive = 0;
  double worst_qclp = 0.0;
  for (int i = 0; i < 1000 && inactive < 50; ++i) {
    RandomMdpOptions o;
    o.num_states = 3;
    o.gamma = 0.8;
    const TabularMDP mdp = random_mdp(o, rng);
    const Policy mu = random_policy(3, 2, rng, 0.1);
    const Policy pi = random_policy(3, 2, rng, 0.05);
    const OccupancyDist m = discounted_occupancy(mdp, mu);
    const double eps = rng.uniform(0.001, 0.05);
    const ClosedFormSolution cf = inner_max_closed_form(mdp, m, pi, eps, mdp.v_max());
    if (!cf.in_box) continue;
    ++inactive;
    QclpOptions q;
    q.method = QclpOptions::Method::kProjectedGradient;
    const InnerMaxResult pg = inner_max_population_oracle(mdp, m, pi, eps, mdp.v_max(), q);
    const double rel = std::abs(pg.value - cf.value) / std::max(1e-12, std::abs(cf.value));
    worst_qclp = std::max(worst_qclp, rel);
    if (rel > 1e-6) record_failure(r, {{"instance", i}, {"closed_form", cf.value}, {"projected", pg.value}});
  }
  if (inactive < 50) {
    r.status = SuiteStatus::kFail;
    r.message = "fewer than 50 box-inactive instances";
  }
  double worst_adv = 0.0;
  for (int i = 0; i < 10; ++i) {
    RandomMdpOptions o;
    o.num_states = 2;
    o.gamma = 0.8;
    const TabularMDP base = random_mdp(o, rng);
    const Policy mu = random_policy(2, 2, rng, 0.2);
    const Policy pi = random_policy(2, 2, rng, 0.05);
    const TabularMDP mdp = with_stationary_initial(base, mu);
    const Dataset ds = sample_trajectory(mdp, mu, 500, std::nullopt, derive_seed(seed, 100 + i));
    const EmpiricalModel model = empirical_model(ds, 2, 2);
    const double eps = 0.02;
    const InnerMaxResult orc = inner_max_population_oracle(
        empirical_mdp(model, mdp), empirical_measure(model), pi, eps, mdp.v_max());
    SolverConfig cfg;
    cfg.epsilon = eps;
    cfg.inner_steps = 5000;
    const AdversarialResult adv =
        inner_max_adversarial(model, mdp, pi, initial_critic(model, mdp, pi, cfg), cfg);
    const double rel = std::abs(adv.value - orc.value) / std::max(1e-12, std::abs(orc.value));
    worst_adv = std::max(worst_adv, rel);
    if (rel > 0.1) record_failure(r, {{"tiny_instance", i}, {"oracle", orc.value}, {"adversarial", adv.value}});
  }
  r.instances = static_cast<std::size_t>(inactive) + 10;
  r.worst = std::max(worst_qclp, worst_adv);
  r.details = {{"qclp_box_inactive", inactive},
               {"qclp_worst_relative_error", worst_qclp},
               {"adversarial_worst_relative_error", worst_adv}};
  return r;
}

SuiteResult pessimism_suite(const MdpSource& src, std::uint64_t seed) {
  SuiteResult r = named("pessimism-identity");
  r.metric = "max |R(pi, 0) - (1 - gamma)(J(mu) - J(pi))|";
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(s);
    const TabularMDP mdp = src.next(random_sizes(rng, 6, 3, 0.5, 0.95), rng);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const Policy mu = random_policy(S, A, rng, 0.05);
    const Policy pi = random_policy(S, A, rng);
    const double lhs =
        inner_max_population_oracle(mdp, discounted_occupancy(mdp, mu), pi, 0.0, mdp.v_max()).value;
    const double rhs = (1.0 - mdp.gamma()) * (value_of_policy(mdp, mu) - value_of_policy(mdp, pi));
    const double res = std::abs(lhs - rhs);
    r.worst = std::max(r.worst, res);
    ++r.instances;
    if (res >= 1e-8) record_failure(r, {{"mdp", describe(mdp, s)}, {"lhs", lhs}, {"rhs", rhs}});
  }
  return r;
}

SuiteResult monotonicity_suite(std::uint64_t seed) {
  SuiteResult r = named("monotonicity");
  r.metric = "largest decrease of R along the eps grid";
  const std::vector<double> grid = {0.0, 0.005, 0.02, 0.05, 0.1};
  constexpr double kGridTolerance = 1e-6;
  double lowest_excess = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 20; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(s);
    RandomMdpOptions o;
    o.num_states = 2 + static_cast<int>(rng.index(2));
    o.gamma = 0.8;
    const TabularMDP mdp = random_mdp(o, rng);
    const OccupancyDist m = discounted_occupancy(mdp, random_policy(o.num_states, 2, rng, 0.1));
    const Policy pi = random_policy(o.num_states, 2, rng);
    double prev = -std::numeric_limits<double>::infinity();
    for (double eps : grid) {
      const double value = inner_max_population_oracle(mdp, m, pi, eps, mdp.v_max()).value;
      const double drop = prev - value;
      r.worst = std::max(r.worst, drop);
      if (drop > 1e-9 * (1.0 + std::abs(value)))
        record_failure(r, {{"mdp", describe(mdp, s)}, {"eps", eps}, {"value", value}, {"previous", prev}});
      prev = value;
    }
    const double eps = 0.02;
    const OraclePolicy oracle = oracle_policy_solve(mdp, m, eps, mdp.v_max());
    const ExcessRisk er = excess_risk(mdp, m, pi, oracle, eps, mdp.v_max());
    lowest_excess = std::min(lowest_excess, er.value);
    if (er.value < -kGridTolerance)
      record_failure(r, {{"mdp", describe(mdp, s)}, {"excess_risk", er.value}});
    ++r.instances;
  }
  r.worst = std::max(r.worst, 0.0);
  r.details = {{"eps_grid", grid}, {"lowest_excess_risk", lowest_excess},
               {"grid_tolerance", kGridTolerance}};
  return r;
}

SuiteResult bernstein_suite(std::uint64_t seed) {
  SuiteResult r = named("bernstein");
  r.metric = "max empirical tail frequency minus bound";
  r.worst = -std::numeric_limits<double>::infinity();
  const std::vector<double> eps_grid = {0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4};
  Rng rng(derive_seed(seed, 6));

  TailCheckSpec mixing_chain;
  mixing_chain.kernel = Matrix(3, 3);
  mixing_chain.kernel << 0.6, 0.3, 0.1, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5;
  mixing_chain.functions = Matrix(8, 3);
  mixing_chain.functions.topRows(3) = Matrix::Identity(3, 3);
  for (int i = 3; i < 8; ++i)
    for (int j = 0; j < 3; ++j) mixing_chain.functions(i, j) = rng.uniform(-1.0, 1.0);

  TailCheckSpec iid_chain;
  iid_chain.kernel = Matrix(2, 2);
  iid_chain.kernel << 0.3, 0.7, 0.3, 0.7;
  iid_chain.functions = Matrix(1, 2);
  iid_chain.functions << 1.0, 0.0;

  TailCheckSpec constant_family = mixing_chain;
  constant_family.functions = Matrix::Constant(2, 3, 0.5);

  nlohmann::json tables = nlohmann::json::object();
  const std::vector<std::pair<std::string, TailCheckSpec*>> specs = {
      {"three-state", &mixing_chain}, {"rank-one", &iid_chain}, {"constant", &constant_family}};
  for (std::size_t k = 0; k < specs.size(); ++k) {
    TailCheckSpec& spec = *specs[k].second;
    spec.eps_grid = eps_grid;
    spec.n = 5000;
    spec.trials = 200;
    spec.seed = derive_seed(seed, 60 + k);
    const TailCheckResult res = bernstein_tail_check(spec);
    for (const auto& row : res.rows) {
      r.worst = std::max(r.worst, row.empirical - row.bound);
      ++r.instances;
      if (!row.holds)
        record_failure(r, {{"chain", specs[k].first}, {"eps", row.eps},
                           {"empirical", row.empirical}, {"bound", row.bound}});
    }
    tables[specs[k].first] = to_json(res);
  }
  r.details = tables;
  return r;
}

using SuiteFn = std::function<SuiteResult(const MdpSource&, std::uint64_t)>;

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> suites = {
      {"contraction", contraction_suite},
      {"pd-identities", pd_suite},
      {"loss-decomposition", decomposition_suite},
      {"l1-contraction", l1_contraction_suite},
      {"fixed-point-drift", drift_suite},
      {"pessimism-identity", pessimism_suite},
      {"unbiasedness", [](const MdpSource&, std::uint64_t s) { return unbiasedness_suite(s); }},
      {"oracle-agreement", [](const MdpSource&, std::uint64_t s) { return oracle_agreement_suite(s); }},
      {"monotonicity", [](const MdpSource&, std::uint64_t s) { return monotonicity_suite(s); }},
      {"bernstein", [](const MdpSource&, std::uint64_t s) { return bernstein_suite(s); }},
  };
  return suites;
}

}  // namespace

std::string to_string(SuiteStatus status) {
  switch (status) {
    case SuiteStatus::kPass: return "pass";
    case SuiteStatus::kFail: return "fail";
    case SuiteStatus::kInvalidInput: return "invalid-input";
  }
  return "unknown";
}

bool VerifyReport::passed() const {
  return std::all_of(suites.begin(), suites.end(),
                     [](const SuiteResult& s) { return s.status == SuiteStatus::kPass; });
}

bool VerifyReport::invalid_input() const {
  return std::any_of(suites.begin(), suites.end(),
                     [](const SuiteResult& s) { return s.status == SuiteStatus::kInvalidInput; });
}

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

VerifyReport run_verify_suite(const std::string& selector, const VerifyOptions& opts) {
  std::vector<std::pair<std::string, SuiteFn>> chosen;
  for (const auto& entry : registry()) {
    if (selector == "all" || selector == entry.first) chosen.push_back(entry);
  }
  if (chosen.empty()) throw InvalidInput("unknown verify suite '" + selector + "'");

  VerifyReport report;
  std::optional<TabularMDP> fixed;
  if (opts.mdp) {
    try {
      fixed = mdp_from_json(*opts.mdp);
    } catch (const InvalidInput& e) {
      for (const auto& [name, fn] : chosen) {
        SuiteResult r = named(name);
        r.status = SuiteStatus::kInvalidInput;
        r.message = e.what();
        report.suites.push_back(r);
      }
      return report;
    }
  }
  const MdpSource src(fixed);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const std::uint64_t seed = derive_seed(opts.seed, fnv1a64(chosen[i].first));
    try {
      report.suites.push_back(chosen[i].second(src, seed));
    } catch (const InvalidInput& e) {
      SuiteResult r = named(chosen[i].first);
      r.status = SuiteStatus::kInvalidInput;
      r.message = e.what();
      report.suites.push_back(r);
    }
  }
  return report;
}

nlohmann::json to_json(const SuiteResult& suite) {
  return {{"name", suite.name},
          {"status", to_string(suite.status)},
          {"instances", suite.instances},
          {"metric", suite.metric},
          {"worst", suite.worst},
          {"failures", suite.failures},
          {"details", suite.details},
          {"message", suite.message}};
}

nlohmann::json to_json(const VerifyReport& report) {
  nlohmann::json suites = nlohmann::json::array();
  for (const auto& s : report.suites) suites.push_back(to_json(s));
  return {{"passed", report.passed()}, {"suites", suites}};
}

}  // namespace pessim
