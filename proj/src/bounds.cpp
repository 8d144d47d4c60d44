#include "pessim/bounds.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pessim {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

double log_factor(double n, double eta) { return std::pow(std::log(n), 2.0 + 1.0 / eta); }

RateBound assemble(const BoundInputs& in, double prefactor, int dim, double z) {
  RateBound out;
  out.dimension = dim;
  out.zeta_star = z;
  out.exponent = -z / (dim + 2.0 * z);
  out.value = in.constant * in.r_max * prefactor * std::pow(in.n, out.exponent) *
                  log_factor(in.n, in.mixing.eta) +
              in.constant * std::sqrt(in.epsilon);
  return out;
}

std::string format_context(const TabularMDP& mdp, const std::string& extra) {
  std::ostringstream os;
  os.precision(6);
  os << "S=" << mdp.num_states() << " A=" << mdp.num_actions() << " gamma=" << mdp.gamma()
     << " " << extra;
  return os.str();
}

double weighted_l1(const Matrix& weight, const Matrix& diff) {
  return (weight.array() * diff.array().abs()).sum();
}

}  // namespace

void BoundInputs::validate() const {
  require(d >= 1, "d must be positive");
  require(zeta > 0.0 && B > 0.0 && s >= 0, "smoothness parameters must be positive");
  require(n > 1.0, "|D| must exceed 1");
  require(mixing.eta > 0.0 && mixing.b > 0.0 && mixing.c >= 0.0, "invalid mixing parameters");
  require(r_max > 0.0 && epsilon >= 0.0 && constant > 0.0, "invalid scale parameters");
  require(lambda > 0.0 && lambda < 1.0, "lambda must lie in (0, 1)");
  require(composition_zetas.size() == composition_dims.size(),
          "composition zetas and dims differ in length");
  for (std::size_t i = 0; i < composition_zetas.size(); ++i)
    require(composition_zetas[i] > 0.0 && composition_dims[i] >= 1,
            "composition entries must be positive");
}

double zeta_star(double zeta) { return zeta * std::min(1.0, zeta); }

double zeta_star_composition(const std::vector<double>& zetas, double zeta) {
  require(!zetas.empty(), "composition needs at least one level");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < zetas.size(); ++i) {
    double term = zetas[i];
    for (std::size_t l = i + 1; l < zetas.size(); ++l) term *= std::min(zetas[l], 1.0);
    best = std::min(best, term);
  }
  return best * std::min(1.0, zeta);
}

RateBound main_bound(const BoundInputs& in) {
  in.validate();
  const double pre = std::pow(in.d, in.s + std::max(in.zeta, 1.0) / 2.0);
  return assemble(in, pre, in.d, zeta_star(in.zeta));
}

int lowdim_dimension(const BoundInputs& in) {
  if (in.d_k > 0) return in.d_k;
  require(in.minkowski_dim > 0.0, "low-dimensional bound needs d_K or a Minkowski dimension");
  return static_cast<int>(std::ceil(in.minkowski_dim / (in.lambda * in.lambda)));
}

RateBound lowdim_bound(const BoundInputs& in) {
  in.validate();
  const int dk = lowdim_dimension(in);
  const double pre = std::sqrt(static_cast<double>(in.d)) *
                     std::pow(dk, in.s + (std::max(in.zeta, 1.0) + 1.0) / 2.0) /
                     std::pow(1.0 - in.lambda, in.zeta / 2.0);
  return assemble(in, pre, dk, zeta_star(in.zeta));
}

RateBound composition_bound(const BoundInputs& in) {
  in.validate();
  require(!in.composition_dims.empty(), "composition bound needs component dimensions");
  const int dstar = *std::max_element(in.composition_dims.begin(), in.composition_dims.end());
  const double pre = std::pow(dstar, in.s + std::max(in.zeta, 1.0) / 2.0);
  return assemble(in, pre, dstar, zeta_star_composition(in.composition_zetas, in.zeta));
}

double approx_bound(double B, int s, double zeta, int d, double N, double M, bool doubled) {
  require(B > 0.0 && s >= 0 && zeta > 0.0 && d >= 1 && N > 0.0 && M > 0.0,
          "approximation bound inputs must be positive");
  const double lead = doubled ? 38.0 : 19.0;
  return lead * B * (s + 1.0) * (s + 1.0) * std::pow(d, s + std::max(zeta, 1.0) / 2.0) *
         std::pow(N * M, -2.0 * zeta / d);
}

std::int64_t n0_threshold(double b, double c, double eta) {
  require(b > 0.0 && c >= 0.0 && eta > 0.0, "invalid mixing parameters");
  constexpr std::int64_t kCap = std::int64_t{1} << 62;
  const double k = 2.0 / eta;
  const auto log_ok = [&](std::int64_t m) {
    const double x = std::log(static_cast<double>(m));
    return x - k * std::log(x) >= std::log(4.0) - 1e-12;
  };
  const auto clamp_cap = [&](double v) {
    return v >= static_cast<double>(kCap) ? kCap : static_cast<std::int64_t>(v);
  };
  const std::int64_t start = std::max<std::int64_t>(3, clamp_cap(std::ceil(std::sqrt(808.0 * c))));
  std::int64_t m = start;
  if (!log_ok(m)) {
    // m / ln(m)^k decreases until e^k and increases afterwards.
    std::int64_t lo = std::max(start, clamp_cap(std::ceil(std::exp(std::min(k, 43.0)))));
    std::int64_t hi = lo;
    while (!log_ok(hi) && hi < kCap / 2) hi *= 2;
    if (!log_ok(hi)) {
      m = kCap;
    } else {
      while (lo < hi) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (log_ok(mid)) hi = mid; else lo = mid + 1;
      }
      m = lo;
    }
  }
  return std::max(m, clamp_cap(std::ceil(std::exp(std::min(3.0 / b, 43.0)))));
}

GenBound gen_bound(double r_max, double P, double L, double n, const MixingParams& mixing,
                   double constant) {
  require(r_max > 0.0 && P > 1.0 && L >= 1.0 && n > 1.0 && constant > 0.0,
          "generalization bound inputs out of range");
  GenBound out;
  out.value = constant * r_max * std::sqrt(P * L * std::log(P)) *
              std::pow(std::log(n), (2.0 + mixing.eta) / (2.0 * mixing.eta)) / std::sqrt(n);
  out.n0 = n0_threshold(mixing.b, mixing.c, mixing.eta);
  out.below_threshold = n < static_cast<double>(out.n0);
  return out;
}

CoveringBound vc_and_covering(double P, double L, double v_max, double n, double eps,
                              double constant) {
  require(P > 1.0 && L >= 1.0 && v_max > 0.0 && n >= 1.0 && eps > 0.0 && constant > 0.0,
          "covering inputs out of range");
  CoveringBound out;
  out.vcdim = constant * P * L * std::log(P);
  const auto log_cover = [&](double e) {
    return 2.0 * out.vcdim * std::log(std::exp(1.0) * v_max * n / ((e / 2.0) * out.vcdim));
  };
  out.log_covering = log_cover(eps);
  out.log_covering_loss = 2.0 * log_cover(eps / 2.0);
  return out;
}

// ---------------------------------------------------------------------------

InequalityCheck InequalityCheck::make(double lhs, double rhs, std::string context) {
  return {lhs, rhs, lhs <= rhs + kInequalitySlack, std::move(context)};
}

InequalityCheck l1_contraction_check(const TabularMDP& mdp, const OccupancyDist& rho,
                                     const Policy& phi, const QFunction& f) {
  const Concentrability conc = concentrability(occupancy(mdp, phi, rho.kind), rho);
  const double denom = 1.0 - mdp.gamma() * conc.value;
  if (!conc.finite || denom <= 0.0)
    throw InvalidInput("l1 contraction bound is vacuous: gamma * C >= 1");
  const Matrix fixed = q_fixed_point(mdp, phi).values;
  const Matrix residual = f.values - bellman_apply(mdp, phi, f).values;
  const double lhs = weighted_l1(rho.mass, f.values - fixed);
  const double rhs = std::sqrt((rho.mass.array() * residual.array().square()).sum()) / denom;
  std::ostringstream extra;
  extra << "kind=" << to_string(rho.kind) << " C=" << conc.value;
  return InequalityCheck::make(lhs, rhs, format_context(mdp, extra.str()));
}

double policy_distance(const OccupancyDist& rho, const Policy& phi, const Policy& pi) {
  require(phi.probs().rows() == rho.mass.rows() && pi.probs().rows() == rho.mass.rows(),
          "policy and measure shapes differ");
  const Vector w = rho.state_marginal();
  return w.dot((phi.probs() - pi.probs()).cwiseAbs().rowwise().sum());
}

InequalityCheck fixed_point_drift_check(const TabularMDP& mdp, const OccupancyDist& rho,
                                        const Policy& phi, const Policy& pi_star) {
  const double delta = policy_distance(rho, phi, pi_star);
  const double g = 1.0 - mdp.gamma();
  const double denom = g * g - g * delta;
  if (denom <= 0.0) throw InvalidInput("fixed-point drift bound: denominator not positive");
  const Matrix diff = q_fixed_point(mdp, phi).values - q_fixed_point(mdp, pi_star).values;
  std::ostringstream extra;
  extra << "delta=" << delta;
  return InequalityCheck::make(weighted_l1(rho.mass, diff), delta / denom,
                               format_context(mdp, extra.str()));
}

double loss_decomposition_residual(const TabularMDP& mdp, const Policy& mu, const Policy& pi,
                                   const QFunction& f1, const QFunction& f2) {
  const Matrix d_mu = discounted_occupancy(mdp, mu).mass;
  const Matrix d_pi = discounted_occupancy(mdp, pi).mass;
  const auto loss = [&](const QFunction& f) {
    const Vector v = state_values(f, pi);
    double total = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s)
      for (int a = 0; a < mdp.num_actions(); ++a) total += d_mu(s, a) * (v(s) - f.values(s, a));
    return total;
  };
  const Matrix g1 = f1.values - bellman_apply(mdp, pi, f1).values;
  const Matrix g2 = f2.values - bellman_apply(mdp, pi, f2).values;
  const auto expect = [](const Matrix& w, const Matrix& x) { return (w.array() * x.array()).sum(); };
  const double lhs = loss(f1) - loss(f2);
  const double rhs = -expect(d_mu, g1) + expect(d_pi, g1) + expect(d_mu, g2) - expect(d_pi, g2);
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------

bool TailCheckResult::all_hold() const {
  return std::all_of(rows.begin(), rows.end(), [](const TailRow& r) { return r.holds; });
}

int greedy_covering_number(const Matrix& functions, double r) {
  const Eigen::Index m = functions.rows();
  std::vector<bool> covered(static_cast<std::size_t>(m), false);
  int centres = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (covered[static_cast<std::size_t>(i)]) continue;
    ++centres;
    for (Eigen::Index j = i; j < m; ++j) {
      if ((functions.row(i) - functions.row(j)).cwiseAbs().maxCoeff() <= r)
        covered[static_cast<std::size_t>(j)] = true;
    }
  }
  return centres;
}

double bernstein_bound(double covering, double n, double eps, double B, double eta) {
  const double exponent =
      -3.0 * n * eps * eps / (std::pow(std::log(n), 2.0 / eta) * (384.0 * B * B + 64.0 * eps * B));
  return 4.0 * covering * std::exp(exponent);
}

TailCheckResult bernstein_tail_check(const TailCheckSpec& spec) {
  const Eigen::Index S = spec.kernel.rows();
  require(S >= 1 && spec.kernel.cols() == S, "kernel must be square");
  require(spec.functions.cols() == S && spec.functions.rows() >= 1,
          "functions need one column per state");
  require(!spec.eps_grid.empty() && spec.trials >= 1 && spec.n >= 2, "empty tail-check grid");
  for (Eigen::Index i = 0; i < S; ++i) {
    require((spec.kernel.row(i).array() >= 0.0).all() &&
                std::abs(spec.kernel.row(i).sum() - 1.0) <= 1e-9,
            "kernel rows must be probability vectors");
  }

  TailCheckResult out;
  const double lambda2 = std::max(second_eigenvalue_modulus(spec.kernel), 1e-12);
  require(lambda2 < 1.0, "chain is not geometrically mixing");
  out.mixing = {-std::log(lambda2), 1.0, 1.0};
  out.n0 = n0_threshold(out.mixing.b, out.mixing.c, out.mixing.eta);
  const double n = static_cast<double>(spec.n);
  out.below_threshold = n < static_cast<double>(out.n0);
  out.sup_norm = std::max(spec.functions.cwiseAbs().maxCoeff(), 1e-300);

  const Vector stationary = stationary_distribution(spec.kernel);
  const Vector means = spec.functions * stationary;

  std::vector<double> deviations(static_cast<std::size_t>(spec.trials));
  for (int t = 0; t < spec.trials; ++t) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t)));
    Vector visits = Vector::Zero(S);
    auto x = static_cast<Eigen::Index>(rng.categorical(stationary));
    for (std::size_t i = 0; i < spec.n; ++i) {
      visits(x) += 1.0;
      x = static_cast<Eigen::Index>(rng.categorical(spec.kernel.row(x)));
    }
    deviations[static_cast<std::size_t>(t)] =
        (spec.functions * (visits / n) - means).cwiseAbs().maxCoeff();
  }

  for (double eps : spec.eps_grid) {
    require(eps > 0.0, "eps grid must be positive");
    TailRow row;
    row.eps = eps;
    const auto exceed = std::count_if(deviations.begin(), deviations.end(),
                                      [eps](double d) { return d > eps; });
    row.empirical = static_cast<double>(exceed) / spec.trials;
    row.covering = greedy_covering_number(spec.functions, eps / 4.0);
    row.bound = bernstein_bound(row.covering, n, eps, out.sup_norm, out.mixing.eta);
    row.holds = row.empirical <= row.bound + kInequalitySlack;
    out.rows.push_back(row);
  }
  return out;
}

nlohmann::json to_json(const InequalityCheck& check) {
  return {{"lhs", check.lhs}, {"rhs", check.rhs}, {"holds", check.holds}, {"context", check.context}};
}

nlohmann::json to_json(const TailCheckResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"eps", r.eps}, {"empirical", r.empirical}, {"bound", r.bound},
                    {"covering", r.covering}, {"holds", r.holds}});
  }
  return {{"rows", rows},
          {"mixing", {{"b", result.mixing.b}, {"c", result.mixing.c}, {"eta", result.mixing.eta}}},
          {"n0", result.n0},
          {"below_threshold", result.below_threshold},
          {"sup_norm", result.sup_norm},
          {"holds", result.all_hold()}};
}

}  // namespace pessim
