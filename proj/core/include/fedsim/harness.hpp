#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/algorithms.hpp"
#include "fedsim/config.hpp"
#include "fedsim/link_model.hpp"
#include "fedsim/objectives.hpp"

namespace fedsim {

inline constexpr const char* kMetricsHeader =
    "round,grad_norm,consensus_error,train_loss,test_accuracy,active_count";

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

/// Objective for a config: quadratic targets or a Synthetic dataset, both
/// drawn from stream `data` under data_seed.
std::unique_ptr<Objective> make_objective(const ExperimentConfig& config);
FederatedDataset make_dataset(double alpha, double beta, std::size_t clients, std::uint64_t seed,
                              std::size_t samples_per_client = 250);
/// Trace from trace_file when set, otherwise generated from stream `links`
/// under seed, so runs that share seed and link settings share the trace.
ActivationTrace make_trace(const ExperimentConfig& config);

struct SimulateOptions {
  /// Recorded in the manifest: "config" or "env:FEDSIM_SEED".
  std::string seed_source = "config";
  bool write_trace = true;
};

struct SimulationOutcome {
  int exit_code = 0;
  bool diverged = false;
  std::optional<std::size_t> failure_round;
  std::vector<MetricsRow> rows;
  std::optional<FleetState> final_state;
  std::string trace_checksum;
  std::string config_hash;
  double final_grad_norm = 0.0;  // at the evaluation model after the last round
  double final_train_loss = 0.0;
  std::optional<double> final_test_accuracy;
  std::filesystem::path directory;
};

/// Runs one experiment and writes metrics.csv, manifest.json and (optionally)
/// trace.csv into `directory`. Exit code 0 on completion, 3 on divergence.
SimulationOutcome cmd_simulate(const ExperimentConfig& config,
                               const std::filesystem::path& directory,
                               const SimulateOptions& options = {});

/// Applies FEDSIM_SEED when set. Returns the seed source label.
std::string apply_seed_override(ExperimentConfig& config);

struct ReproduceOptions {
  std::uint64_t base_seed = 1;
  std::size_t seeds = 1;
  std::size_t jobs = 1;
};

struct Fig2Row {
  double p0 = 0.0, p1 = 0.0;
  Algorithm algorithm = Algorithm::fedavg;
  LocalCompute local_compute = LocalCompute::all;
  double initial_grad_norm = 0.0;
  double mean_final_grad_norm = 0.0;
  double oracle_bias_norm = 0.0;  // ||sum_i w_i u_i - x*||
  std::size_t diverged = 0;
};

/// Grid (p0, p1) x {fedavg, fedpbc} x {all, active_only}; writes per-run
/// directories and comparison.csv.
std::vector<Fig2Row> cmd_reproduce_fig2(double scale, const std::filesystem::path& directory,
                                        const ReproduceOptions& options = {});

struct Fig3Row {
  Algorithm algorithm = Algorithm::fedavg;
  std::uint64_t seed = 0;
  double final_train_loss = 0.0;
  double final_test_accuracy = 0.0;
  bool diverged = false;
};

/// Synthetic(1,1) under zipf links; writes per-run directories and summary.csv.
std::vector<Fig3Row> cmd_reproduce_fig3(double scale, const std::filesystem::path& directory,
                                        const ReproduceOptions& options = {});

/// JSON line with rho, the ergodicity bound and the entry bound for p.
std::string cmd_mixing(const Vector& p);

/// JSON lines of limit weights per method; with targets (d x m) also the
/// predicted point and its distance to the optimum.
std::vector<std::string> cmd_oracle(const Vector& p, const std::optional<DenseMatrix>& targets,
                                    std::size_t mc_trials = 0, std::uint64_t seed = 1);

/// Reads reals separated by commas, whitespace or newlines.
Vector read_real_file(const std::filesystem::path& path);
/// One line per client: its target vector, comma separated. Returns d x m.
DenseMatrix read_targets_file(const std::filesystem::path& path);

}  // namespace fedsim
