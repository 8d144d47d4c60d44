#include "pessim/experiment.hpp"
#include "pessim/trajectory.hpp"
#include "pessim/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pessim::InvalidInput("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw pessim::InvalidInput(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pessimistic offline RL lab: verification batteries, scaling studies, bounds"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Run invariant batteries and print a JSON verdict");
  std::string suite = "all";
  std::uint64_t verify_seed = pessim::VerifyOptions{}.seed;
  std::string verify_mdp;
  std::string verify_out;
  verify->add_option("--suite", suite, "Battery name or 'all'");
  verify->add_option("--seed", verify_seed, "Root seed");
  verify->add_option("--mdp", verify_mdp, "MDP JSON used in place of random MDPs");
  verify->add_option("--out", verify_out, "Write the JSON here instead of stdout");
  verify->add_flag_callback("--list", [] {
    for (const auto& name : pessim::verify_suite_names()) std::cout << name << "\n";
    std::exit(kExitPass);
  }, "List battery names");

  auto* scaling = app.add_subcommand("scaling", "Run a scaling study from a config file");
  std::string scaling_config;
  std::string scaling_output;
  int scaling_workers = -1;
  scaling->add_option("--config", scaling_config, "Config path")->required();
  scaling->add_option("--output", scaling_output, "Override the output directory");
  scaling->add_option("--workers", scaling_workers, "Override the worker count");

  auto* bounds = app.add_subcommand("bounds", "Emit the bounds table as CSV");
  std::string bounds_config;
  std::string bounds_out;
  bounds->add_option("--config", bounds_config, "Config path with a [bounds] section");
  bounds->add_option("--out", bounds_out, "Write the CSV here instead of stdout");

  auto* mdp = app.add_subcommand("mdp", "MDP utilities");
  mdp->require_subcommand(1);
  auto* gen = mdp->add_subcommand("gen", "Generate a random MDP as JSON");
  std::uint64_t gen_seed = 0;
  int gen_states = 4;
  int gen_actions = 2;
  double gen_gamma = 0.9;
  double gen_rmax = 1.0;
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--states", gen_states, "Number of states")->check(CLI::Range(1, pessim::kMaxStates));
  gen->add_option("--actions", gen_actions, "Number of actions")->check(CLI::Range(1, pessim::kMaxActions));
  gen->add_option("--gamma", gen_gamma, "Discount factor");
  gen->add_option("--r-max", gen_rmax, "Reward bound");

  auto* data = app.add_subcommand("data", "Dataset utilities");
  data->require_subcommand(1);
  auto* sample = data->add_subcommand("sample", "Sample one behaviour trajectory as CSV");
  std::string sample_mdp;
  std::string sample_policy;
  double sample_min_prob = 0.15;
  std::size_t sample_n = 1000;
  std::uint64_t sample_seed = 0;
  std::int64_t sample_burn_in = -1;
  std::string sample_out;
  std::string sample_embed;
  int sample_embed_dim = 2;
  sample->add_option("--mdp", sample_mdp, "MDP JSON")->required();
  sample->add_option("--policy", sample_policy, "Behaviour policy JSON (default: random from seed)");
  sample->add_option("--min-prob", sample_min_prob, "Floor of the random behaviour policy");
  sample->add_option("--n", sample_n, "Transitions")->check(CLI::PositiveNumber);
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--burn-in", sample_burn_in, "Burn-in steps (default: relaxation time)");
  sample->add_option("--out", sample_out, "CSV path (sidecar JSON at <out>.json)")->required();
  sample->add_option("--embed", sample_embed, "Record an embedding in the sidecar (grid, curve, one-hot)");
  sample->add_option("--embed-dim", sample_embed_dim, "Embedding dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*verify) {
      pessim::VerifyOptions opts;
      opts.seed = verify_seed;
      if (!verify_mdp.empty()) opts.mdp = read_json(verify_mdp);
      const pessim::VerifyReport report = pessim::run_verify_suite(suite, opts);
      write_text(verify_out, pessim::to_json(report).dump(2) + "\n");
      for (const auto& s : report.suites)
        std::cerr << s.name << ": " << pessim::to_string(s.status) << "\n";
      if (report.invalid_input()) return kExitUsage;
      return report.passed() ? kExitPass : kExitFailure;
    }
    if (*scaling) {
      pessim::ExperimentConfig cfg =
          pessim::experiment_config_from(pessim::Config::load(scaling_config));
      if (!scaling_output.empty()) cfg.output_dir = scaling_output;
      if (scaling_workers >= 0) cfg.workers = scaling_workers;
      const auto t0 = std::chrono::steady_clock::now();
      const pessim::ExperimentReport report = pessim::run_scaling_study(cfg);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      pessim::emit_report(report, cfg.output_dir);
      for (const auto& s : report.summaries)
        std::cout << "n=" << s.n << " eps=" << s.epsilon << " median=" << s.median
                  << " cells=" << s.cells_ok << "\n";
      for (const auto& f : report.fits) {
        std::cout << "eps=" << f.epsilon;
        if (f.fit) std::cout << " slope=" << f.fit->slope << " r2=" << f.fit->r_squared;
        std::cout << " theory_exponent=" << f.theory_exponent << " inversions=" << f.inversions
                  << "\n";
      }
      std::cout << "complete=" << (report.complete ? "yes" : "no") << " seconds=" << seconds
                << " output=" << cfg.output_dir << "\n";
      return kExitPass;
    }
    if (*bounds) {
      const pessim::Config cfg =
          bounds_config.empty() ? pessim::Config{} : pessim::Config::load(bounds_config);
      write_text(bounds_out, pessim::bounds_table_csv(pessim::bounds_table_spec_from(cfg)));
      return kExitPass;
    }
    if (*gen) {
      pessim::RandomMdpOptions o;
      o.num_states = gen_states;
      o.num_actions = gen_actions;
      o.gamma = gen_gamma;
      o.r_max = gen_rmax;
      pessim::Rng rng(gen_seed);
      std::cout << pessim::to_json(pessim::random_mdp(o, rng)).dump(2) << "\n";
      return kExitPass;
    }
    if (*sample) {
      const pessim::TabularMDP m = pessim::mdp_from_json(read_json(sample_mdp));
      pessim::Rng rng(sample_seed);
      const pessim::Policy mu =
          sample_policy.empty()
              ? pessim::random_policy(m.num_states(), m.num_actions(), rng, sample_min_prob)
              : pessim::policy_from_json(read_json(sample_policy));
      std::optional<std::int64_t> burn;
      if (sample_burn_in >= 0) burn = sample_burn_in;
      const std::string ref = sample_policy.empty() ? "random" : sample_policy;
      const pessim::Dataset ds = pessim::sample_trajectory(m, mu, sample_n, burn, sample_seed, ref);
      std::ofstream out(sample_out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + sample_out);
      pessim::write_dataset_csv(ds, out);
      std::optional<pessim::EmbedSpec> embed;
      if (!sample_embed.empty()) embed = pessim::EmbedSpec::parse(sample_embed, sample_embed_dim);
      write_text(sample_out + ".json", pessim::dataset_sidecar(ds, embed).dump(2) + "\n");
      return kExitPass;
    }
  } catch (const pessim::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
