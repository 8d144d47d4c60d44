#include "pessim/experiment.hpp"
#include "pessim/verify.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pessim {
namespace {

namespace fs = std::filesystem;

ExperimentConfig injected_config() {
  ExperimentConfig cfg;
  cfg.sizes = {250, 500, 1000, 2000, 4000};
  cfg.replicates = 3;
  cfg.epsilons = {0.05};
  return cfg;
}

TEST(Summarize, RecoversInjectedRate) {
  const ExperimentConfig cfg = injected_config();
  ExperimentReport report;
  for (std::size_t n : cfg.sizes) {
    for (int r = 0; r < cfg.replicates; ++r) {
      CellRecord c;
      c.n = n;
      c.replicate = r;
      c.epsilon = 0.05;
      c.ok = true;
      // Replicates straddle the median, which sits on the injected curve.
      c.excess_reported = 2.0 * std::pow(static_cast<double>(n), -0.25) * (1.0 + 0.1 * (r - 1));
      report.cells.push_back(c);
    }
  }
  summarize(report, cfg);
  ASSERT_EQ(report.fits.size(), 1u);
  ASSERT_TRUE(report.fits[0].fit.has_value());
  EXPECT_NEAR(report.fits[0].fit->slope, -0.25, 1e-9);
  EXPECT_NEAR(std::exp(report.fits[0].fit->intercept), 2.0, 1e-9);
  EXPECT_TRUE(report.fits[0].non_increasing);
  EXPECT_EQ(report.fits[0].inversions, 0);
  EXPECT_TRUE(report.complete);
  EXPECT_DOUBLE_EQ(report.fits[0].theory_exponent, -0.25);
}

TEST(Summarize, FailedCellsAndShortGrids) {
  ExperimentConfig cfg = injected_config();
  cfg.sizes = {100, 200, 400};
  ExperimentReport report;
  for (std::size_t n : cfg.sizes) {
    CellRecord c;
    c.n = n;
    c.epsilon = 0.05;
    c.ok = n != 200;
    c.excess_reported = 1.0 / static_cast<double>(n);
    report.cells.push_back(c);
  }
  summarize(report, cfg);
  EXPECT_FALSE(report.complete);
  EXPECT_FALSE(report.fits[0].fit.has_value());
  EXPECT_EQ(report.summaries[1].cells_ok, 0);
  // Rows without a median are left out of the plot.
  std::istringstream plot(plot_csv(report));
  std::string line;
  int rows = 0;
  while (std::getline(plot, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(RateFit, ExactPowerLaws) {
  std::vector<std::pair<double, double>> pts;
  for (double n : {100.0, 400.0, 1600.0, 6400.0}) pts.emplace_back(n, 3.0 / std::sqrt(n));
  const RateFit f = rate_fit(pts);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  const RateFit two = rate_fit({{10.0, 1.0}, {100.0, 0.1}});
  EXPECT_NEAR(two.slope, -1.0, 1e-12);
  EXPECT_THROW(rate_fit({{10.0, 1.0}, {10.0, 2.0}}), InvalidInput);
  EXPECT_TRUE(rate_fit({{10.0, 0.0}, {100.0, 0.1}}).clipped);
}

TEST(RateFit, NoisyResamplesStayNearTrueSlope) {
  Rng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::pair<double, double>> pts;
    for (double n : {250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0})
      pts.emplace_back(n, std::pow(n, -0.4) * std::exp(0.02 * rng.normal()));
    EXPECT_NEAR(rate_fit(pts).slope, -0.4, 0.05);
  }
}

TEST(Stats, MedianMeanStddev) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(mean({1.0, 2.0, 6.0}), 3.0);
  EXPECT_NEAR(stddev({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}), std::sqrt(32.0 / 7.0), 1e-14);
  EXPECT_EQ(stddev({1.0}), 0.0);
  const RateFit l = linear_fit({0.0, 1.0, 2.0}, {1.0, 3.0, 5.0});
  EXPECT_NEAR(l.slope, 2.0, 1e-14);
  EXPECT_NEAR(l.intercept, 1.0, 1e-14);
}

TEST(Report, JsonRoundTripAndEmptyCsv) {
  ExperimentReport report;
  report.name = "x";
  report.config = {{"a", 1}};
  report.config_hash = config_hash(report.config);
  CellRecord c;
  c.n = 10;
  c.ok = true;
  c.excess_reported = 0.125;
  c.conc_star = std::numeric_limits<double>::infinity();
  c.error = "none, really";
  report.cells.push_back(c);
  const std::string dumped = to_json(report).dump();
  const ExperimentReport back = report_from_json(nlohmann::json::parse(dumped));
  EXPECT_EQ(to_json(back).dump(), dumped);
  EXPECT_TRUE(std::isinf(back.cells[0].conc_star));
  EXPECT_EQ(cells_csv(back), cells_csv(report));

  const std::string empty = cells_csv(ExperimentReport{});
  EXPECT_EQ(std::count(empty.begin(), empty.end(), '\n'), 1);
  EXPECT_EQ(config_hash({{"a", 1}}), config_hash(nlohmann::json::parse("{\"a\":1}")));
  EXPECT_NE(config_hash({{"a", 1}}), config_hash({{"a", 2}}));
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

ExperimentConfig small_study() {
  ExperimentConfig cfg;
  cfg.sizes = {100, 200, 400, 800};
  cfg.replicates = 2;
  cfg.epsilons = {0.05};
  cfg.solver.critic = CriticKind::kTabular;
  cfg.solver.critic_step = 1.0;
  cfg.solver.outer_steps = 40;
  cfg.solver.inner_steps = 10;
  cfg.workers = 1;
  return cfg;
}

TEST(Study, DeterministicAcrossRunsAndWorkers) {
  const ExperimentConfig cfg = small_study();
  const ExperimentReport a = run_scaling_study(cfg);
  const ExperimentReport b = run_scaling_study(cfg);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  ExperimentConfig two = cfg;
  two.workers = 2;
  const ExperimentReport c = run_scaling_study(two);
  EXPECT_EQ(cells_csv(a), cells_csv(c));
  EXPECT_EQ(plot_csv(a), plot_csv(c));
  EXPECT_EQ(a.cells.size(), 8u);
  EXPECT_TRUE(a.complete);
  ASSERT_TRUE(a.fits[0].fit.has_value());
  for (const auto& cell : a.cells) EXPECT_GE(cell.excess_reported, 0.0);
}

TEST(Study, SingleSizeHasNoFit) {
  ExperimentConfig cfg = small_study();
  cfg.sizes = {200};
  const ExperimentReport r = run_scaling_study(cfg);
  EXPECT_FALSE(r.fits[0].fit.has_value());
  EXPECT_EQ(r.summaries.size(), 1u);
}

TEST(Study, ConfigFileParses) {
  const ExperimentConfig cfg =
      experiment_config_from(Config::load(std::string(PESSIM_SOURCE_DIR) + "/configs/scaling.toml"));
  EXPECT_EQ(cfg.sizes.size(), 5u);
  EXPECT_EQ(cfg.solver.critic, CriticKind::kNetwork);
  EXPECT_THROW(experiment_config_from(Config::parse("[study]\ntypo = 1\n")), InvalidInput);
  const std::string csv = bounds_table_csv(
      bounds_table_spec_from(Config::load(std::string(PESSIM_SOURCE_DIR) + "/configs/bounds.toml")));
  EXPECT_GT(std::count(csv.begin(), csv.end(), '\n'), 1);
}

TEST(Verify, SingleSuiteSelector) {
  const VerifyReport r = run_verify_suite("contraction");
  ASSERT_EQ(r.suites.size(), 1u);
  EXPECT_EQ(r.suites[0].name, "contraction");
  EXPECT_TRUE(r.passed());
  EXPECT_THROW(run_verify_suite("no-such-suite"), InvalidInput);
}

TEST(Verify, CorruptedMdpIsInvalidInput) {
  VerifyOptions opts;
  opts.mdp = nlohmann::json{{"num_states", 2}, {"transition", "garbage"}};
  const VerifyReport r = run_verify_suite("contraction", opts);
  EXPECT_TRUE(r.invalid_input());
  EXPECT_FALSE(r.passed());
}

int run(const std::string& args, const std::string& out = "/dev/null") {
  const std::string cmd = std::string(PESSIM_CLI) + " " + args + " >" + out + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = fs::temp_directory_path() / "pessim_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string mdp = (dir / "mdp.json").string();
  ASSERT_EQ(run("mdp gen --seed 3 --states 3 --actions 2", mdp), 0);
  ASSERT_GT(fs::file_size(mdp), 0u);
  EXPECT_EQ(run("verify --suite contraction --mdp " + mdp), 0);
  EXPECT_EQ(run("verify --suite nope"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{\"num_states\": 2}";
  }
  EXPECT_EQ(run("verify --suite contraction --mdp " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run("data sample --mdp " + mdp + " --n 50 --seed 1 --out " + (dir / "d.csv").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "d.csv.json"));
  EXPECT_EQ(run("bounds --config " + std::string(PESSIM_SOURCE_DIR) + "/configs/bounds.toml --out " +
                (dir / "b.csv").string()),
            0);
  EXPECT_GT(fs::file_size(dir / "b.csv"), 0u);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace pessim
