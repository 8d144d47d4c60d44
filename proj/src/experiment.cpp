#include "pessim/experiment.hpp"

#include "pessim/approx.hpp"
#include "pessim/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace pessim {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string oracle_mode_name(OraclePolicyOptions::Mode m) {
  switch (m) {
    case OraclePolicyOptions::Mode::kAuto: return "auto";
    case OraclePolicyOptions::Mode::kGrid: return "grid";
    case OraclePolicyOptions::Mode::kMultiStart: return "multistart";
  }
  return "auto";
}

OraclePolicyOptions::Mode parse_oracle_mode(const std::string& s) {
  if (s == "auto") return OraclePolicyOptions::Mode::kAuto;
  if (s == "grid") return OraclePolicyOptions::Mode::kGrid;
  if (s == "multistart") return OraclePolicyOptions::Mode::kMultiStart;
  throw InvalidInput("unknown oracle mode '" + s + "'");
}

std::vector<int> to_ints(const std::vector<std::int64_t>& v) {
  return {v.begin(), v.end()};
}

struct StudySetup {
  TabularMDP mdp;
  Policy mu;
  OccupancyDist measure;
};

StudySetup build_setup(const ExperimentConfig& cfg) {
  Rng rng(cfg.mdp_seed);
  std::optional<TabularMDP> mdp;
  if (!cfg.mdp_file.empty()) {
    std::ifstream in(cfg.mdp_file);
    require(static_cast<bool>(in), "cannot open MDP file " + cfg.mdp_file);
    mdp = mdp_from_json(nlohmann::json::parse(in));
  } else {
    mdp = random_mdp(cfg.mdp_options, rng);
  }
  Policy mu = random_policy(mdp->num_states(), mdp->num_actions(), rng, cfg.behavior_min_prob);
  TabularMDP final_mdp = cfg.stationary_initial ? with_stationary_initial(*mdp, mu) : *mdp;
  OccupancyDist measure = discounted_occupancy(final_mdp, mu);
  return {final_mdp, mu, measure};
}

/// Hidden layers used for the critic at dataset size n.
std::vector<int> critic_layers(const ExperimentConfig& cfg, std::size_t n) {
  if (cfg.architecture == ArchitectureMode::kManual) return cfg.solver.critic_hidden;
  const int d = cfg.solver.embed.ambient_dim;
  const double z = zeta_star(cfg.zeta);
  const double nn = static_cast<double>(n);
  const auto N = static_cast<std::uint64_t>(std::ceil(std::pow(nn, d / (2.0 * d + 4.0 * z))));
  const auto M = static_cast<std::uint64_t>(std::ceil(std::log(nn)));
  const ArchitectureSpec spec = shrink_architecture(arch_from_theorem(d, 0, N, M), cfg.param_cap);
  return std::vector<int>(spec.depth, static_cast<int>(spec.width));
}

BoundInputs bound_inputs(const ExperimentConfig& cfg, const TabularMDP& mdp, double n, double eps) {
  BoundInputs in;
  in.d = cfg.solver.embed.ambient_dim;
  in.zeta = cfg.zeta;
  in.n = n;
  in.r_max = mdp.r_max();
  in.epsilon = eps;
  return in;
}

}  // namespace

std::string to_string(ArchitectureMode mode) {
  return mode == ArchitectureMode::kManual ? "manual" : "theorem-shrink";
}

ArchitectureMode parse_architecture_mode(const std::string& s) {
  if (s == "manual") return ArchitectureMode::kManual;
  if (s == "theorem-shrink") return ArchitectureMode::kTheoremShrink;
  throw InvalidInput("unknown architecture mode '" + s + "'");
}

void ExperimentConfig::validate() const {
  require(!sizes.empty() && !epsilons.empty(), "size and eps grids must be nonempty");
  for (std::size_t n : sizes) require(n >= 2 && n <= 10000000, "dataset sizes must lie in [2, 1e7]");
  for (double e : epsilons) require(e >= 0.0, "eps grid must be nonnegative");
  require(replicates >= 1 && replicates <= 10000, "replicates must lie in [1, 10000]");
  require(workers >= 0, "workers must be nonnegative");
  require(behavior_min_prob >= 0.0 && behavior_min_prob * mdp_options.num_actions <= 1.0,
          "behavior min_prob infeasible");
  require(zeta > 0.0 && param_cap >= 16, "invalid architecture parameters");
  solver.validate();
}

ExperimentConfig experiment_config_from(const Config& c) {
  c.require_known({"study.name", "study.seed", "study.workers", "study.sizes", "study.replicates",
                   "study.epsilons", "study.output", "study.architecture", "study.param_cap",
                   "study.zeta", "mdp.file", "mdp.seed", "mdp.states", "mdp.actions", "mdp.gamma",
                   "mdp.r_max", "mdp.noise_fraction", "mdp.concentration", "behavior.min_prob",
                   "behavior.stationary_initial", "behavior.burn_in", "solver.critic",
                   "solver.penalty", "solver.beta", "solver.outer", "solver.inner",
                   "solver.critic_step", "solver.policy_step", "solver.policy", "solver.embed",
                   "solver.embed_dim", "solver.critic_hidden", "solver.policy_hidden",
                   "solver.v_max", "oracle.mode", "oracle.resolution", "oracle.refine",
                   "oracle.starts", "oracle.iterations", "oracle.seed"});
  ExperimentConfig cfg;
  cfg.name = c.get_string("study.name", cfg.name);
  cfg.seed = static_cast<std::uint64_t>(c.get_int("study.seed", static_cast<std::int64_t>(cfg.seed)));
  cfg.workers = static_cast<int>(c.get_int("study.workers", cfg.workers));
  cfg.sizes.clear();
  for (auto n : c.get_int_list("study.sizes", {250, 500, 1000, 2000, 4000})) {
    require(n > 0, "dataset sizes must be positive");
    cfg.sizes.push_back(static_cast<std::size_t>(n));
  }
  cfg.replicates = static_cast<int>(c.get_int("study.replicates", cfg.replicates));
  cfg.epsilons = c.get_double_list("study.epsilons", cfg.epsilons);
  cfg.output_dir = c.get_string("study.output", cfg.output_dir);
  cfg.architecture = parse_architecture_mode(c.get_string("study.architecture", "manual"));
  cfg.param_cap = static_cast<std::uint64_t>(c.get_int("study.param_cap", 2000));
  cfg.zeta = c.get_double("study.zeta", cfg.zeta);

  cfg.mdp_file = c.get_string("mdp.file", "");
  cfg.mdp_seed = static_cast<std::uint64_t>(c.get_int("mdp.seed", 11));
  cfg.mdp_options.num_states = static_cast<int>(c.get_int("mdp.states", 4));
  cfg.mdp_options.num_actions = static_cast<int>(c.get_int("mdp.actions", 2));
  cfg.mdp_options.gamma = c.get_double("mdp.gamma", 0.9);
  cfg.mdp_options.r_max = c.get_double("mdp.r_max", 1.0);
  cfg.mdp_options.noise_fraction = c.get_double("mdp.noise_fraction", 0.1);
  cfg.mdp_options.transition_concentration = c.get_double("mdp.concentration", 1.0);

  cfg.behavior_min_prob = c.get_double("behavior.min_prob", cfg.behavior_min_prob);
  cfg.stationary_initial = c.get_bool("behavior.stationary_initial", true);
  if (c.has("behavior.burn_in")) cfg.burn_in = c.get_int("behavior.burn_in", 0);

  SolverConfig& s = cfg.solver;
  s.critic = parse_critic(c.get_string("solver.critic", "network"));
  s.penalty = parse_penalty(c.get_string("solver.penalty", "augmented-lagrangian"));
  s.lagrange_beta = c.get_double("solver.beta", s.lagrange_beta);
  s.outer_steps = static_cast<int>(c.get_int("solver.outer", s.outer_steps));
  s.inner_steps = static_cast<int>(c.get_int("solver.inner", s.inner_steps));
  s.critic_step = c.get_double("solver.critic_step", s.critic == CriticKind::kNetwork ? 0.01 : 1.0);
  s.policy_step = c.get_double("solver.policy_step", s.policy_step);
  s.policy_parameterization = parse_policy_param(c.get_string("solver.policy", "tabular-softmax"));
  s.embed = EmbedSpec::parse(c.get_string("solver.embed", "grid"),
                             static_cast<int>(c.get_int("solver.embed_dim", 2)));
  s.critic_hidden = to_ints(c.get_int_list("solver.critic_hidden", {32, 32}));
  s.policy_hidden = to_ints(c.get_int_list("solver.policy_hidden", {16}));
  s.v_max = c.get_double("solver.v_max", 0.0);

  cfg.oracle.mode = parse_oracle_mode(c.get_string("oracle.mode", "auto"));
  cfg.oracle.resolution = c.get_double("oracle.resolution", cfg.oracle.resolution);
  cfg.oracle.refine = c.get_bool("oracle.refine", cfg.oracle.refine);
  cfg.oracle.starts = static_cast<int>(c.get_int("oracle.starts", cfg.oracle.starts));
  cfg.oracle.iterations = static_cast<int>(c.get_int("oracle.iterations", cfg.oracle.iterations));
  cfg.oracle.seed = static_cast<std::uint64_t>(
      c.get_int("oracle.seed", static_cast<std::int64_t>(cfg.oracle.seed)));
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json out = {
      {"name", cfg.name},
      {"seed", cfg.seed},
      {"sizes", cfg.sizes},
      {"replicates", cfg.replicates},
      {"epsilons", cfg.epsilons},
      {"architecture", to_string(cfg.architecture)},
      {"param_cap", cfg.param_cap},
      {"zeta", cfg.zeta},
      {"mdp",
       {{"file", cfg.mdp_file},
        {"seed", cfg.mdp_seed},
        {"states", cfg.mdp_options.num_states},
        {"actions", cfg.mdp_options.num_actions},
        {"gamma", cfg.mdp_options.gamma},
        {"r_max", cfg.mdp_options.r_max},
        {"noise_fraction", cfg.mdp_options.noise_fraction},
        {"concentration", cfg.mdp_options.transition_concentration}}},
      {"behavior",
       {{"min_prob", cfg.behavior_min_prob},
        {"stationary_initial", cfg.stationary_initial},
        {"burn_in", cfg.burn_in ? nlohmann::json(*cfg.burn_in) : nlohmann::json(nullptr)}}},
      {"solver", to_json(cfg.solver)},
      {"oracle",
       {{"mode", oracle_mode_name(cfg.oracle.mode)},
        {"resolution", cfg.oracle.resolution},
        {"refine", cfg.oracle.refine},
        {"starts", cfg.oracle.starts},
        {"iterations", cfg.oracle.iterations},
        {"seed", cfg.oracle.seed}}}};
  return out;
}

std::string config_hash(const nlohmann::json& config) { return hex64(fnv1a64(config.dump())); }

// ---------------------------------------------------------------------------

ExperimentReport run_scaling_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const StudySetup setup = build_setup(cfg);
  const TabularMDP& mdp = setup.mdp;
  const double v_max = cfg.solver.v_max > 0.0 ? cfg.solver.v_max : mdp.v_max();

  ExperimentReport report;
  report.name = cfg.name;
  report.seed = cfg.seed;
  report.config = to_json(cfg);
  report.config_hash = config_hash(report.config);

  std::vector<OraclePolicy> oracles;
  std::vector<double> oracle_conc;
  for (double eps : cfg.epsilons) {
    oracles.push_back(oracle_policy_solve(mdp, setup.measure, eps, v_max, cfg.oracle));
    oracle_conc.push_back(
        concentrability(discounted_occupancy(mdp, oracles.back().policy), setup.measure).value);
  }

  struct Job {
    std::size_t eps_index;
    std::size_t n;
    int replicate;
  };
  std::vector<Job> jobs;
  for (std::size_t e = 0; e < cfg.epsilons.size(); ++e)
    for (std::size_t n : cfg.sizes)
      for (int r = 0; r < cfg.replicates; ++r) jobs.push_back({e, n, r});

  std::vector<CellRecord> cells(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job& job = jobs[k];
      CellRecord& cell = cells[k];
      const double eps = cfg.epsilons[job.eps_index];
      cell.n = job.n;
      cell.replicate = job.replicate;
      cell.epsilon = eps;
      cell.seed = derive_seed(cfg.seed, k);
      cell.conc_star = oracle_conc[job.eps_index];
      cell.bound = main_bound(bound_inputs(cfg, mdp, static_cast<double>(job.n), eps)).value;
      try {
        SolverConfig sc = cfg.solver;
        sc.epsilon = eps;
        sc.v_max = v_max;
        sc.seed = derive_seed(cell.seed, 2);
        if (sc.critic == CriticKind::kNetwork) {
          sc.critic_hidden = critic_layers(cfg, job.n);
          cell.critic_depth = static_cast<int>(sc.critic_hidden.size());
          cell.critic_width = sc.critic_hidden.empty() ? 0 : sc.critic_hidden.front();
        }
        const Dataset ds =
            sample_trajectory(mdp, setup.mu, job.n, cfg.burn_in, derive_seed(cell.seed, 1));
        const SolveResult res = solve_empirical_minimax(ds, mdp, sc);
        const ExcessRisk er =
            excess_risk(mdp, setup.measure, res.policy_hat, oracles[job.eps_index], eps, v_max);
        cell.excess_risk = er.value;
        cell.excess_reported = er.reported;
        cell.excess_negative = er.negative;
        cell.r_hat = er.r_hat;
        cell.r_star = er.r_star;
        cell.slack = res.final_slack;
        cell.constraint_failure = res.constraint_failure;
        const Concentrability ch =
            concentrability(discounted_occupancy(mdp, res.policy_hat), setup.measure);
        cell.conc_hat = ch.value;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
    }
  };
  unsigned count = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers)
                                   : std::max(1u, std::thread::hardware_concurrency());
  count = std::min<unsigned>(count, static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  report.cells = std::move(cells);
  summarize(report, cfg);
  for (std::size_t e = 0; e < report.fits.size(); ++e) report.fits[e].oracle_value = oracles[e].value;
  return report;
}

void summarize(ExperimentReport& report, const ExperimentConfig& cfg) {
  report.summaries.clear();
  report.fits.clear();
  report.complete = std::all_of(report.cells.begin(), report.cells.end(),
                                [](const CellRecord& c) { return c.ok; });
  for (double eps : cfg.epsilons) {
    EpsilonFit fit;
    fit.epsilon = eps;
    BoundInputs in;
    in.d = cfg.solver.embed.ambient_dim;
    in.zeta = cfg.zeta;
    fit.theory_exponent = main_bound(in).exponent;
    std::vector<std::pair<double, double>> points;
    for (std::size_t n : cfg.sizes) {
      std::vector<double> values;
      double bound = 0.0;
      for (const auto& c : report.cells) {
        if (c.n != n || c.epsilon != eps) continue;
        bound = c.bound;
        if (c.ok) values.push_back(c.excess_reported);
      }
      SizeSummary s;
      s.n = n;
      s.epsilon = eps;
      s.cells_ok = static_cast<int>(values.size());
      s.bound = bound;
      if (!values.empty()) {
        s.median = median(values);
        points.emplace_back(static_cast<double>(n), s.median);
      }
      report.summaries.push_back(s);
    }
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].second > points[i - 1].second) ++fit.inversions;
    fit.non_increasing = fit.inversions <= 1;
    if (points.size() >= 4) fit.fit = rate_fit(points);
    report.fits.push_back(fit);
  }
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

nlohmann::json number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v));
}

double read_number(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"n", c.n}, {"replicate", c.replicate}, {"epsilon", c.epsilon},
                     {"seed", c.seed}, {"ok", c.ok}, {"error", c.error},
                     {"excess_risk", number(c.excess_risk)},
                     {"excess_reported", number(c.excess_reported)},
                     {"excess_negative", c.excess_negative}, {"r_hat", number(c.r_hat)},
                     {"r_star", number(c.r_star)}, {"slack", number(c.slack)},
                     {"constraint_failure", c.constraint_failure},
                     {"conc_hat", number(c.conc_hat)}, {"conc_star", number(c.conc_star)},
                     {"bound", number(c.bound)}, {"critic_width", c.critic_width},
                     {"critic_depth", c.critic_depth}});
  }
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& s : report.summaries) {
    summaries.push_back({{"n", s.n}, {"epsilon", s.epsilon}, {"median", number(s.median)},
                         {"cells_ok", s.cells_ok}, {"bound", number(s.bound)}});
  }
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : report.fits) {
    nlohmann::json j = {{"epsilon", f.epsilon},
                        {"theory_exponent", f.theory_exponent},
                        {"oracle_value", number(f.oracle_value)},
                        {"non_increasing", f.non_increasing},
                        {"inversions", f.inversions}};
    if (f.fit) {
      j["fit"] = {{"slope", f.fit->slope}, {"intercept", f.fit->intercept},
                  {"r_squared", f.fit->r_squared}, {"clipped", f.fit->clipped}};
    } else {
      j["fit"] = nullptr;
    }
    fits.push_back(j);
  }
  return {{"name", report.name},
          {"tool_version", report.tool_version},
          {"config_hash", report.config_hash},
          {"seed", report.seed},
          {"config", report.config},
          {"constant_convention", report.constant_convention},
          {"complete", report.complete},
          {"cells", cells},
          {"summaries", summaries},
          {"fits", fits}};
}

ExperimentReport report_from_json(const nlohmann::json& doc) {
  ExperimentReport r;
  r.name = doc.at("name").get<std::string>();
  r.tool_version = doc.at("tool_version").get<std::string>();
  r.config_hash = doc.at("config_hash").get<std::string>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.config = doc.at("config");
  r.constant_convention = doc.at("constant_convention").get<std::string>();
  r.complete = doc.at("complete").get<bool>();
  for (const auto& j : doc.at("cells")) {
    CellRecord c;
    c.n = j.at("n").get<std::size_t>();
    c.replicate = j.at("replicate").get<int>();
    c.epsilon = j.at("epsilon").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.ok = j.at("ok").get<bool>();
    c.error = j.at("error").get<std::string>();
    c.excess_risk = read_number(j.at("excess_risk"));
    c.excess_reported = read_number(j.at("excess_reported"));
    c.excess_negative = j.at("excess_negative").get<bool>();
    c.r_hat = read_number(j.at("r_hat"));
    c.r_star = read_number(j.at("r_star"));
    c.slack = read_number(j.at("slack"));
    c.constraint_failure = j.at("constraint_failure").get<bool>();
    c.conc_hat = read_number(j.at("conc_hat"));
    c.conc_star = read_number(j.at("conc_star"));
    c.bound = read_number(j.at("bound"));
    c.critic_width = j.at("critic_width").get<int>();
    c.critic_depth = j.at("critic_depth").get<int>();
    r.cells.push_back(c);
  }
  for (const auto& j : doc.at("summaries")) {
    SizeSummary s;
    s.n = j.at("n").get<std::size_t>();
    s.epsilon = j.at("epsilon").get<double>();
    s.median = read_number(j.at("median"));
    s.cells_ok = j.at("cells_ok").get<int>();
    s.bound = read_number(j.at("bound"));
    r.summaries.push_back(s);
  }
  for (const auto& j : doc.at("fits")) {
    EpsilonFit f;
    f.epsilon = j.at("epsilon").get<double>();
    f.theory_exponent = j.at("theory_exponent").get<double>();
    f.oracle_value = read_number(j.at("oracle_value"));
    f.non_increasing = j.at("non_increasing").get<bool>();
    f.inversions = j.at("inversions").get<int>();
    if (!j.at("fit").is_null()) {
      const auto& g = j.at("fit");
      f.fit = RateFit{g.at("slope").get<double>(), g.at("intercept").get<double>(),
                      g.at("r_squared").get<double>(), g.at("clipped").get<bool>()};
    }
    r.fits.push_back(f);
  }
  return r;
}

std::string cells_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "n,replicate,epsilon,seed,ok,excess_risk,excess_reported,excess_negative,r_hat,r_star,"
        "slack,constraint_failure,conc_hat,conc_star,bound,critic_width,critic_depth,error\n";
  for (const auto& c : report.cells) {
    os << c.n << ',' << c.replicate << ',' << format_double(c.epsilon) << ',' << c.seed << ','
       << (c.ok ? 1 : 0) << ',' << format_double(c.excess_risk) << ','
       << format_double(c.excess_reported) << ',' << (c.excess_negative ? 1 : 0) << ','
       << format_double(c.r_hat) << ',' << format_double(c.r_star) << ','
       << format_double(c.slack) << ',' << (c.constraint_failure ? 1 : 0) << ','
       << format_double(c.conc_hat) << ',' << format_double(c.conc_star) << ','
       << format_double(c.bound) << ',' << c.critic_width << ',' << c.critic_depth << ','
       << csv_field(c.error) << '\n';
  }
  return os.str();
}

std::string plot_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "n,epsilon,median_excess_risk,theory_curve\n";
  for (const auto& s : report.summaries) {
    if (s.cells_ok == 0) continue;
    os << s.n << ',' << format_double(s.epsilon) << ',' << format_double(s.median) << ','
       << format_double(s.bound) << '\n';
  }
  return os.str();
}

void emit_report(const ExperimentReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + directory + ": " + ec.message());
  const auto write = [&](const std::string& name, const std::string& body) {
    const fs::path path = fs::path(directory) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body;
    if (!out) throw std::runtime_error("failed writing " + path.string());
  };
  write("cells.csv", cells_csv(report));
  write("report.json", to_json(report).dump(2) + "\n");
  write("plot.csv", plot_csv(report));
}

// ---------------------------------------------------------------------------

BoundsTableSpec bounds_table_spec_from(const Config& c) {
  c.require_known({"bounds.dims", "bounds.zetas", "bounds.sizes", "bounds.s", "bounds.B",
                   "bounds.r_max", "bounds.epsilon", "bounds.eta", "bounds.b", "bounds.c",
                   "bounds.constant", "bounds.P", "bounds.L", "bounds.d_k", "bounds.lambda"});
  BoundsTableSpec spec;
  spec.dims = to_ints(c.get_int_list("bounds.dims", {1, 2, 4, 8, 16}));
  spec.zetas = c.get_double_list("bounds.zetas", spec.zetas);
  spec.sizes = c.get_double_list("bounds.sizes", spec.sizes);
  BoundInputs& b = spec.base;
  b.s = static_cast<int>(c.get_int("bounds.s", 0));
  b.B = c.get_double("bounds.B", 1.0);
  b.r_max = c.get_double("bounds.r_max", 1.0);
  b.epsilon = c.get_double("bounds.epsilon", 0.0);
  b.mixing.eta = c.get_double("bounds.eta", 1.0);
  b.mixing.b = c.get_double("bounds.b", 1.0);
  b.mixing.c = c.get_double("bounds.c", 1.0);
  b.constant = c.get_double("bounds.constant", 1.0);
  b.d_k = static_cast<int>(c.get_int("bounds.d_k", 2));
  b.lambda = c.get_double("bounds.lambda", 0.5);
  spec.P = c.get_double("bounds.P", spec.P);
  spec.L = c.get_double("bounds.L", spec.L);
  require(!spec.dims.empty() && !spec.zetas.empty() && !spec.sizes.empty(),
          "bounds lattice must be nonempty");
  return spec;
}

std::string bounds_table_csv(const BoundsTableSpec& spec) {
  std::ostringstream os;
  os << "d,zeta,n,zeta_star,main_value,main_exponent,d_k,lowdim_value,lowdim_exponent,"
        "approx_value,gen_value,gen_below_threshold,constant\n";
  for (int d : spec.dims) {
    for (double zeta : spec.zetas) {
      for (double n : spec.sizes) {
        BoundInputs in = spec.base;
        in.d = d;
        in.zeta = zeta;
        in.n = n;
        in.d_k = std::min(d, spec.base.d_k > 0 ? spec.base.d_k : d);
        const RateBound main = main_bound(in);
        const RateBound low = lowdim_bound(in);
        const double z = zeta_star(zeta);
        const double N = std::ceil(std::pow(n, d / (2.0 * d + 4.0 * z)));
        const double M = std::ceil(std::log(n));
        const double approx = approx_bound(in.B, in.s, zeta, d, N, M);
        const GenBound gen = gen_bound(in.r_max, spec.P, spec.L, n, in.mixing, in.constant);
        os << d << ',' << format_double(zeta) << ',' << format_double(n) << ','
           << format_double(z) << ',' << format_double(main.value) << ','
           << format_double(main.exponent) << ',' << in.d_k << ',' << format_double(low.value)
           << ',' << format_double(low.exponent) << ',' << format_double(approx) << ','
           << format_double(gen.value) << ',' << (gen.below_threshold ? 1 : 0) << ','
           << format_double(in.constant) << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace pessim
