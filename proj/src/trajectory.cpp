#include "pessim/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace pessim {

void Dataset::validate(int num_states, int num_actions) const {
  if (transitions.empty()) throw InvalidInput("dataset must contain at least one transition");
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& tr = transitions[i];
    if (tr.s < 0 || tr.s >= num_states || tr.s_next < 0 || tr.s_next >= num_states ||
        tr.a < 0 || tr.a >= num_actions)
      throw InvalidInput("transition " + std::to_string(i) + " has an index out of range");
    if (i + 1 < transitions.size()) {
      if (transitions[i + 1].t <= tr.t)
        throw InvalidInput("time index must be strictly increasing");
      if (transitions[i + 1].s != tr.s_next)
        throw InvalidInput("transition " + std::to_string(i) + " does not chain to the next");
    }
  }
}

double sample_reward(const TabularMDP& mdp, int s, int a, Rng& rng) {
  const double w = mdp.reward_noise()(s, a);
  const double r = mdp.reward_mean()(s, a) + rng.uniform(-w, w);
  return std::clamp(r, -mdp.r_max(), mdp.r_max());
}

double second_eigenvalue_modulus(const Matrix& kernel) {
  if (kernel.rows() <= 1) return 0.0;
  Eigen::EigenSolver<Matrix> solver(kernel, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue solver failed");
  const auto& ev = solver.eigenvalues();
  std::vector<double> moduli;
  std::size_t unit = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    moduli.push_back(std::abs(ev(i)));
    const double dist = std::abs(ev(i) - std::complex<double>(1.0, 0.0));
    if (dist < best) {
      best = dist;
      unit = static_cast<std::size_t>(i);
    }
  }
  moduli.erase(moduli.begin() + static_cast<std::ptrdiff_t>(unit));
  return *std::max_element(moduli.begin(), moduli.end());
}

double spectral_gap(const TabularMDP& mdp, const Policy& mu) {
  const Matrix kernel = pair_transition(mdp, mu);
  if (!analyze_chain(kernel).ergodic())
    throw InvalidInput("behaviour chain is not ergodic; spectral gap undefined");
  return second_eigenvalue_modulus(kernel);
}

std::int64_t default_burn_in(const TabularMDP& mdp, const Policy& mu) {
  const double lambda2 = spectral_gap(mdp, mu);
  return static_cast<std::int64_t>(std::ceil(10.0 / (1.0 - std::min(lambda2, 1.0 - 1e-9))));
}

Dataset sample_trajectory(const TabularMDP& mdp, const Policy& mu, std::size_t n,
                          std::optional<std::int64_t> burn_in, std::uint64_t seed,
                          std::string behavior_ref) {
  if (n == 0) throw InvalidInput("trajectory length must be at least 1");
  if (mu.num_states() != mdp.num_states() || mu.num_actions() != mdp.num_actions())
    throw InvalidInput("behaviour policy shape does not match the MDP");
  std::int64_t skip = 0;
  if (burn_in) {
    if (*burn_in < 0) throw InvalidInput("burn_in must be nonnegative");
    skip = *burn_in;
    if (skip > 0 && !analyze_chain(pair_transition(mdp, mu)).ergodic())
      throw InvalidInput("burn-in requested on a non-ergodic chain");
  } else {
    skip = default_burn_in(mdp, mu);
  }

  Rng rng(seed);
  Dataset ds;
  ds.behavior_ref = std::move(behavior_ref);
  ds.seed = seed;
  ds.burn_in = skip;
  ds.transitions.reserve(n);
  int s = static_cast<int>(rng.categorical(mdp.initial_dist()));
  const std::int64_t total = skip + static_cast<std::int64_t>(n);
  for (std::int64_t step = 0; step < total; ++step) {
    const int a = static_cast<int>(rng.categorical(mu.probs().row(s)));
    const double r = sample_reward(mdp, s, a, rng);
    const int s_next = static_cast<int>(rng.categorical(mdp.transition().row(mdp.index(s, a))));
    if (step >= skip) ds.transitions.push_back({s, a, r, s_next, step - skip});
    s = s_next;
  }
  return ds;
}

// ---------------------------------------------------------------------------

Probe Probe::parse(const std::string& id) {
  const auto colon = id.find(':');
  const std::string head = id.substr(0, colon);
  int idx = 0;
  if (colon != std::string::npos) {
    try {
      idx = std::stoi(id.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidInput("bad probe index in '" + id + "'");
    }
  }
  if (head == "state") return {Kind::kStateIndicator, idx};
  if (head == "reward") return {Kind::kReward, 0};
  if (head == "coord") return {Kind::kCoordinate, idx};
  throw InvalidInput("unknown probe '" + id + "'");
}

std::string Probe::id() const {
  switch (kind) {
    case Kind::kStateIndicator: return "state:" + std::to_string(index);
    case Kind::kReward: return "reward";
    case Kind::kCoordinate: return "coord:" + std::to_string(index);
  }
  return "?";
}

AutocorrelationProfile autocovariance(const std::vector<double>& series, int max_lag) {
  const auto n = series.size();
  if (max_lag < 0 || static_cast<double>(max_lag) >= static_cast<double>(n) / 4.0)
    throw InvalidInput("dataset too short for the requested max_lag (need max_lag < n/4)");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = series[i] - mean;

  AutocorrelationProfile out;
  out.sample_size = n;
  for (int lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    const std::size_t m = n - static_cast<std::size_t>(lag);
    for (std::size_t k = 0; k < m; ++k) acc += centered[k] * centered[k + lag];
    out.points.push_back({lag, acc / static_cast<double>(m)});
  }
  out.variance = out.points.front().value;
  out.noise_floor = 3.0 * out.variance / std::sqrt(static_cast<double>(n));
  return out;
}

AutocorrelationProfile autocorrelation_profile(const Dataset& ds, const Probe& probe, int max_lag,
                                               const EmbeddedDataset* embedded) {
  std::vector<double> series;
  series.reserve(ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& tr = ds.transitions[k];
    switch (probe.kind) {
      case Probe::Kind::kStateIndicator:
        series.push_back(tr.s == probe.index ? 1.0 : 0.0);
        break;
      case Probe::Kind::kReward:
        series.push_back(tr.r);
        break;
      case Probe::Kind::kCoordinate:
        if (!embedded || probe.index < 0 || probe.index >= embedded->ambient_dim)
          throw InvalidInput("coordinate probe needs an embedding with that coordinate");
        series.push_back(embedded->points(probe.index, static_cast<Eigen::Index>(k)));
        break;
    }
  }
  return autocovariance(series, max_lag);
}

MixingFit fit_mixing_rate(const AutocorrelationProfile& profile) {
  std::vector<double> lags;
  std::vector<double> logs;
  std::vector<double> weights;
  for (const auto& p : profile.points) {
    if (p.lag < 1) continue;
    if (!(std::abs(p.value) > profile.noise_floor) || p.value == 0.0) break;
    lags.push_back(p.lag);
    logs.push_back(std::log(std::abs(p.value)));
    weights.push_back(p.value * p.value);
  }
  MixingFit best;
  best.lags_used = static_cast<int>(lags.size());
  if (lags.size() < 5) {
    best.effectively_independent = true;
    best.params = {std::numeric_limits<double>::infinity(), 0.0, 1.0};
    return best;
  }
  const double wmax = *std::max_element(weights.begin(), weights.end());
  for (double& w : weights) w /= wmax;

  bool first = true;
  // eta = 1 first so it wins exact ties.
  for (double eta : {1.0, 0.5, 2.0}) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lags.size(); ++i) {
      const double x = std::pow(lags[i], eta);
      const double w = weights[i];
      sw += w;
      sx += w * x;
      sy += w * logs[i];
      sxx += w * x * x;
      sxy += w * x * logs[i];
    }
    const double denom = sw * sxx - sx * sx;
    const double slope = (sw * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / sw;
    double rss = 0.0;
    for (std::size_t i = 0; i < lags.size(); ++i) {
      const double e = logs[i] - (intercept + slope * std::pow(lags[i], eta));
      rss += weights[i] * e * e;
    }
    rss /= sw;
    if (first || rss < best.residual) {
      first = false;
      best.residual = rss;
      best.params = {-slope, std::exp(intercept), eta};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

EmbedSpec EmbedSpec::parse(const std::string& name, int ambient_dim) {
  if (name == "one-hot") return {Kind::kOneHot, ambient_dim};
  if (name == "curve") return {Kind::kCurve, ambient_dim};
  if (name == "grid") return {Kind::kGrid, ambient_dim};
  throw InvalidInput("unknown embedding spec '" + name + "'");
}

std::string EmbedSpec::name() const {
  switch (kind) {
    case Kind::kOneHot: return "one-hot";
    case Kind::kCurve: return "curve";
    case Kind::kGrid: return "grid";
  }
  return "?";
}

Vector curve_point(double t, int ambient_dim) {
  Vector x(ambient_dim);
  x(0) = t;
  for (int j = 1; j < ambient_dim; ++j) x(j) = 0.5 + 0.4 * std::sin(M_PI * (j + 1) * t + j);
  return x;
}

Matrix embedding_table(const EmbedSpec& spec, int num_states, int num_actions) {
  const int n = num_states * num_actions;
  const int d = spec.ambient_dim;
  Matrix table = Matrix::Zero(d, n);
  switch (spec.kind) {
    case EmbedSpec::Kind::kOneHot:
      if (d < n) throw InvalidInput("one-hot embedding needs ambient_dim >= S*A");
      for (int k = 0; k < n; ++k) table(k, k) = 1.0;
      break;
    case EmbedSpec::Kind::kGrid:
      if (d != 2) throw InvalidInput("grid embedding is defined for ambient_dim = 2");
      for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) {
          table(0, s * num_actions + a) = (s + 0.5) / num_states;
          table(1, s * num_actions + a) = (a + 0.5) / num_actions;
        }
      break;
    case EmbedSpec::Kind::kCurve:
      if (d < 2) throw InvalidInput("curve embedding needs ambient_dim >= 2");
      for (int k = 0; k < n; ++k) table.col(k) = curve_point((k + 0.5) / n, d);
      break;
  }
  return table;
}

EmbeddedDataset embed_dataset(const Dataset& ds, const TabularMDP& mdp, const EmbedSpec& spec) {
  ds.validate(mdp.num_states(), mdp.num_actions());
  EmbeddedDataset out;
  out.spec = spec;
  out.ambient_dim = spec.ambient_dim;
  out.num_states = mdp.num_states();
  out.num_actions = mdp.num_actions();
  out.table = embedding_table(spec, mdp.num_states(), mdp.num_actions());
  out.points.resize(spec.ambient_dim, static_cast<Eigen::Index>(ds.size()));
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& tr = ds.transitions[k];
    out.points.col(static_cast<Eigen::Index>(k)) = out.table.col(mdp.index(tr.s, tr.a));
    out.states.push_back(tr.s);
    out.actions.push_back(tr.a);
    out.rewards.push_back(tr.r);
    out.next_states.push_back(tr.s_next);
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  out << "t,s,a,r,s_next\n";
  std::array<char, 64> buf{};
  for (const auto& tr : ds.transitions) {
    std::snprintf(buf.data(), buf.size(), "%.17g", tr.r);
    out << tr.t << ',' << tr.s << ',' << tr.a << ',' << buf.data() << ',' << tr.s_next << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,s,a,r,s_next")
    throw InvalidInput("dataset CSV must start with the header t,s,a,r,s_next");
  Dataset ds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    Transition tr;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(row >> tr.t >> c1 >> tr.s >> c2 >> tr.a >> c3 >> tr.r >> c4 >> tr.s_next) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
      throw InvalidInput("malformed dataset row: " + line);
    ds.transitions.push_back(tr);
  }
  return ds;
}

nlohmann::json dataset_sidecar(const Dataset& ds, const std::optional<EmbedSpec>& embed) {
  nlohmann::json doc;
  doc["seed"] = ds.seed;
  doc["behavior_ref"] = ds.behavior_ref;
  doc["burn_in"] = ds.burn_in;
  doc["size"] = ds.size();
  if (embed) {
    doc["embed"] = {{"kind", embed->name()}, {"ambient_dim", embed->ambient_dim}};
  } else {
    doc["embed"] = nullptr;
  }
  return doc;
}

}  // namespace pessim
