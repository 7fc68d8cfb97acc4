// fedsim command-line front end.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/objectives.hpp"
#include "fedsim/random.hpp"

namespace fs = std::filesystem;

namespace {

// A LIST argument names a file when one exists at that path.
fedsim::Vector probabilities_arg(const std::string& arg) {
  if (fs::is_regular_file(arg)) return fedsim::read_real_file(arg);
  return fedsim::parse_real_list(arg);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fedsim::ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated optimization simulator"};
  app.set_version_flag("--version", FEDSIM_VERSION);
  app.require_subcommand(1);

  std::string config_path, out_dir, scale_text = "1", p_arg, u_path;
  std::size_t seeds = 1, jobs = 1, mc_trials = 0;
  std::uint64_t base_seed = 1, seed = 1;
  double alpha = 1.0, beta = 1.0;
  std::size_t clients = 30, samples = 250;

  auto* simulate = app.add_subcommand("simulate", "Run one experiment from a config file");
  simulate->add_option("--config", config_path, "Config file (key = value)")->required();
  simulate->add_option("--out", out_dir, "Output directory (overrides the config's output)");

  auto* fig2 = app.add_subcommand("reproduce-fig2", "Counterexample grid under two-group links");
  auto* fig3 = app.add_subcommand("reproduce-fig3", "Synthetic(1,1) under zipf links");
  for (auto* sub : {fig2, fig3}) {
    sub->add_option("--scale", scale_text, "1, 1/2, 1/5 or 1/10");
    sub->add_option("--out", out_dir, "Output directory")->required();
    sub->add_option("--seeds", seeds, "Seeds per configuration");
    sub->add_option("--base-seed", base_seed, "First seed");
    sub->add_option("--jobs", jobs, "Parallel runs");
  }

  auto* mixing = app.add_subcommand("mixing", "Spectral report for a probability vector");
  mixing->add_option("--p", p_arg, "Comma-separated probabilities or a file")->required();

  auto* oracle = app.add_subcommand("oracle", "FedAvg limit weights for a probability vector");
  oracle->add_option("--p", p_arg, "Comma-separated probabilities or a file")->required();
  oracle->add_option("--u", u_path, "Targets file, one client per line")->check(CLI::ExistingFile);
  oracle->add_option("--mc-trials", mc_trials, "Also estimate by Monte Carlo");
  oracle->add_option("--seed", seed, "Seed for the Monte Carlo estimate");

  auto* gendata = app.add_subcommand("gendata", "Write a Synthetic(alpha, beta) dataset");
  gendata->add_option("--alpha", alpha)->required();
  gendata->add_option("--beta", beta)->required();
  gendata->add_option("--m", clients)->required();
  gendata->add_option("--seed", seed)->required();
  gendata->add_option("--samples", samples, "Samples per client");
  gendata->add_option("--out", out_dir, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      auto cfg = fedsim::parse_config(read_text(config_path));
      fedsim::SimulateOptions opts;
      opts.seed_source = fedsim::apply_seed_override(cfg);
      const fs::path dir = out_dir.empty() ? fs::path(cfg.output) : fs::path(out_dir);
      auto outcome = fedsim::cmd_simulate(cfg, dir, opts);
      if (outcome.diverged)
        std::cerr << "diverged at round " << *outcome.failure_round << "; partial metrics in "
                  << (dir / "metrics.csv").string() << '\n';
      return outcome.exit_code;
    }
    if (*fig2 || *fig3) {
      fedsim::ReproduceOptions opts;
      opts.base_seed = base_seed;
      opts.seeds = seeds;
      opts.jobs = jobs;
      const double scale = fedsim::parse_scale(scale_text);
      if (*fig2) {
        for (const auto& r : fedsim::cmd_reproduce_fig2(scale, out_dir, opts))
          std::cout << "p0=" << r.p0 << " p1=" << r.p1 << ' ' << to_string(r.algorithm) << '/'
                    << to_string(r.local_compute) << " final_grad_norm=" << r.mean_final_grad_norm
                    << " oracle_bias=" << r.oracle_bias_norm << '\n';
      } else {
        for (const auto& r : fedsim::cmd_reproduce_fig3(scale, out_dir, opts))
          std::cout << to_string(r.algorithm) << " seed=" << r.seed
                    << " train_loss=" << r.final_train_loss
                    << " test_accuracy=" << r.final_test_accuracy << '\n';
      }
      return 0;
    }
    if (*mixing) {
      std::cout << fedsim::cmd_mixing(probabilities_arg(p_arg)) << '\n';
      return 0;
    }
    if (*oracle) {
      std::optional<fedsim::DenseMatrix> targets;
      if (!u_path.empty()) targets = fedsim::read_targets_file(u_path);
      for (const auto& line : fedsim::cmd_oracle(probabilities_arg(p_arg), targets, mc_trials, seed))
        std::cout << line << '\n';
      return 0;
    }
    if (*gendata) {
      auto data = fedsim::make_dataset(alpha, beta, clients, seed, samples);
      std::ofstream out(out_dir, std::ios::binary);
      if (!out) throw fedsim::Error("cannot write " + out_dir);
      fedsim::write_dataset(out, data);
      return 0;
    }
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
