#pragma once

#include "pessim/bounds.hpp"
#include "pessim/config.hpp"
#include "pessim/solver.hpp"
#include "pessim/stats.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pessim {

inline constexpr const char* kToolVersion = "pessim 0.1.0";

enum class ArchitectureMode { kManual, kTheoremShrink };
std::string to_string(ArchitectureMode mode);
ArchitectureMode parse_architecture_mode(const std::string& s);

struct ExperimentConfig {
  std::string name = "scaling";
  std::uint64_t seed = 20240607;
  /// 0 means the hardware concurrency.
  int workers = 0;
  std::vector<std::size_t> sizes = {250, 500, 1000, 2000, 4000};
  int replicates = 10;
  std::vector<double> epsilons = {0.05};
  std::string output_dir = "scaling-out";

  /// MDP from a JSON document, or generated from mdp_seed and mdp_options.
  std::string mdp_file;
  std::uint64_t mdp_seed = 11;
  RandomMdpOptions mdp_options;
  /// Behaviour policy drawn after the MDP from the same generator.
  double behavior_min_prob = 0.15;
  /// Start the chain from mu's stationary state law.
  bool stationary_initial = true;
  std::optional<std::int64_t> burn_in;

  SolverConfig solver;
  ArchitectureMode architecture = ArchitectureMode::kManual;
  /// Parameter cap for the shrunk theorem architecture.
  std::uint64_t param_cap = 2000;
  double zeta = 1.0;
  OraclePolicyOptions oracle;

  void validate() const;
};

/// Reads the sections [study], [mdp], [behavior], [solver], [oracle].
ExperimentConfig experiment_config_from(const Config& cfg);
nlohmann::json to_json(const ExperimentConfig& cfg);

struct CellRecord {
  std::size_t n = 0;
  int replicate = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double excess_risk = 0.0;
  double excess_reported = 0.0;
  bool excess_negative = false;
  double r_hat = 0.0;
  double r_star = 0.0;
  double slack = 0.0;
  bool constraint_failure = false;
  double conc_hat = 0.0;
  double conc_star = 0.0;
  double bound = 0.0;
  int critic_width = 0;
  int critic_depth = 0;
};

struct SizeSummary {
  std::size_t n = 0;
  double epsilon = 0.0;
  double median = 0.0;
  int cells_ok = 0;
  double bound = 0.0;
};

struct EpsilonFit {
  double epsilon = 0.0;
  /// Present iff at least four sizes have a median.
  std::optional<RateFit> fit;
  double theory_exponent = 0.0;
  double oracle_value = 0.0;
  /// Medians never increase, allowing one inversion.
  bool non_increasing = false;
  int inversions = 0;
};

struct ExperimentReport {
  std::string name;
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<CellRecord> cells;
  std::vector<SizeSummary> summaries;
  std::vector<EpsilonFit> fits;
  bool complete = true;
  std::string constant_convention = "C=1";
};

/// Samples, solves and scores every (|D|, replicate, eps) cell. Cell seeds are
/// derive_seed(global seed, cell index); cells run on `workers` threads.
ExperimentReport run_scaling_study(const ExperimentConfig& cfg);

/// Same aggregation over precomputed cells (used with injected risks).
void summarize(ExperimentReport& report, const ExperimentConfig& cfg);

/// Hash of the canonical config JSON.
std::string config_hash(const nlohmann::json& config);

nlohmann::json to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& doc);

/// cells.csv, report.json and plot.csv (n, median, theory curve under C=1).
std::string cells_csv(const ExperimentReport& report);
std::string plot_csv(const ExperimentReport& report);
void emit_report(const ExperimentReport& report, const std::string& directory);

/// Calculator values over a lattice of (d, zeta, n), as CSV with a header.
struct BoundsTableSpec {
  std::vector<int> dims = {1, 2, 4, 8, 16};
  std::vector<double> zetas = {0.5, 1.0, 2.0};
  std::vector<double> sizes = {1e3, 1e4, 1e5, 1e6};
  BoundInputs base;
  double P = 1000.0;
  double L = 4.0;
};

BoundsTableSpec bounds_table_spec_from(const Config& cfg);
std::string bounds_table_csv(const BoundsTableSpec& spec);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace pessim
