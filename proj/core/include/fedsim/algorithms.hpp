#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/link_model.hpp"
#include "fedsim/numerics.hpp"
#include "fedsim/objectives.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

enum class Algorithm { fedavg, fedpbc };
enum class LocalCompute { all, active_only };

std::string_view to_string(Algorithm a);
std::string_view to_string(LocalCompute c);

struct AlgorithmConfig {
  Algorithm variant = Algorithm::fedpbc;
  LocalCompute local_compute = LocalCompute::all;
  std::size_t local_steps = 1;
  double eta = 0.01;
  /// Optional per-round step size; constant `eta` when empty.
  std::function<double(std::size_t round)> step_schedule;

  double step_size(std::size_t round) const { return step_schedule ? step_schedule(round) : eta; }
  void validate() const;
};

/// Client models (column i = x_i^t), the server model x^t and the round index.
struct FleetState {
  DenseMatrix clients;
  Vector global;
  std::size_t round = 0;

  static FleetState initial(std::span<const double> x0, std::size_t clients);
  std::size_t dimension() const noexcept { return global.size(); }
  std::size_t size() const noexcept { return clients.cols(); }
};

/// s steps of x <- x - eta * grad l_i(x; batch) on a fixed batch. When
/// `gradient_sum` is given it receives sum_k grad l_i(x^(k)).
Vector local_sgd(std::span<const double> x0, std::size_t client, std::size_t steps, double eta,
                 const Objective& objective, std::span<const std::size_t> batch,
                 std::size_t round = 0, Vector* gradient_sum = nullptr);

struct RoundOutput {
  FleetState state;
  /// Column i = summed local gradients of client i this round (zero when the
  /// client did not compute).
  DenseMatrix gradient_sums;
  /// Batches used per client (empty for exact objectives or idle clients).
  std::vector<std::vector<std::size_t>> batches;
};

/// Broadcast x^t to active clients, local steps, average the active results.
RoundOutput fedavg_round(const FleetState& state, const ActiveSet& active,
                         const AlgorithmConfig& cfg, const Objective& objective,
                         BatchSchedule* batches = nullptr);

/// Local steps from each client's own model, average the active results,
/// then multicast the new global model to the active clients only.
RoundOutput fedpbc_round(const FleetState& state, const ActiveSet& active,
                         const AlgorithmConfig& cfg, const Objective& objective,
                         BatchSchedule* batches = nullptr);

RoundOutput run_round(const FleetState& state, const ActiveSet& active,
                      const AlgorithmConfig& cfg, const Objective& objective,
                      BatchSchedule* batches = nullptr);

struct MatrixFormReport {
  bool pass = false;
  double max_deviation = 0.0;
};

/// Checks X^{t+1} = (X^t - eta G^t) W^(t) for a FedPBC round with every
/// client computing. G^t is recomputed here from `before` and the batches.
MatrixFormReport matrix_form_check(const FleetState& before, const ActiveSet& active,
                                   const AlgorithmConfig& cfg, const Objective& objective,
                                   const FleetState& after,
                                   std::span<const std::vector<std::size_t>> batches = {},
                                   double tolerance = 1e-10);

/// Model the metrics are evaluated at: the server model for FedAvg, the
/// client average for FedPBC.
Vector evaluation_model(const FleetState& state, Algorithm variant);

/// Models the clients start round t from: FedAvg replaces active columns by
/// the broadcast x^t; FedPBC clients keep their own models.
DenseMatrix starting_models(const FleetState& state, const ActiveSet& active, Algorithm variant);

/// (1/m) sum_i ||x_i - xbar||^2 with xbar the shifted column mean.
double consensus_error(const DenseMatrix& models);

struct MetricsRow {
  std::size_t round = 0;
  double grad_norm = 0.0;
  double consensus_error = 0.0;
  double train_loss = 0.0;
  std::optional<double> test_accuracy;
  std::size_t active_count = 0;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  FleetState final_state;
};

/// Raised when a run produces a non-finite iterate; carries the metrics
/// recorded so far.
class DivergedRun : public DivergenceError {
 public:
  DivergedRun(const DivergenceError& cause, std::vector<MetricsRow> rows)
      : DivergenceError(cause), rows_(std::move(rows)) {}
  const std::vector<MetricsRow>& rows() const noexcept { return rows_; }

 private:
  std::vector<MetricsRow> rows_;
};

struct RunOptions {
  std::size_t batch_size = 32;
  /// Record metrics every `metrics_every` rounds (the last round is always kept).
  std::size_t metrics_every = 1;
};

/// Executes trace.rounds() rounds. Row t is measured at the start of round t,
/// on the models the clients hold once the round's broadcast is delivered.
/// Mini-batches come from stream path batches/...
ExperimentResult run_experiment(const AlgorithmConfig& cfg, const Objective& objective,
                                const ActivationTrace& trace, std::span<const double> x0,
                                SeededStream& stream, const RunOptions& options = {});

/// Generates the trace from `process` (stream path links/...) then runs.
ExperimentResult run_experiment(const AlgorithmConfig& cfg, const Objective& objective,
                                const LinkProbabilityProcess& process, std::size_t rounds,
                                std::span<const double> x0, SeededStream& stream,
                                const RunOptions& options = {});

}  // namespace fedsim
