#include "fedsim/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsim/mixing.hpp"

namespace fedsim {

std::string_view to_string(Algorithm a) { return a == Algorithm::fedavg ? "fedavg" : "fedpbc"; }

std::string_view to_string(LocalCompute c) {
  return c == LocalCompute::all ? "all" : "active_only";
}

void AlgorithmConfig::validate() const {
  if (local_steps < 1) throw ConfigError("algorithm: local_steps must be >= 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("algorithm: eta must be > 0");
}

FleetState FleetState::initial(std::span<const double> x0, std::size_t clients) {
  if (clients == 0) throw ConfigError("fleet: need at least one client");
  FleetState s;
  s.global.assign(x0.begin(), x0.end());
  s.clients = DenseMatrix(x0.size(), clients);
  for (std::size_t i = 0; i < clients; ++i) s.clients.set_column(i, x0);
  return s;
}

Vector local_sgd(std::span<const double> x0, std::size_t client, std::size_t steps, double eta,
                 const Objective& objective, std::span<const std::size_t> batch,
                 std::size_t round, Vector* gradient_sum) {
  Vector x(x0.begin(), x0.end());
  Vector g(x.size());
  if (gradient_sum) gradient_sum->assign(x.size(), 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    objective.gradient(client, x, batch, g);
    for (std::size_t r = 0; r < x.size(); ++r) x[r] -= eta * g[r];
    if (gradient_sum) axpy(1.0, g, *gradient_sum);
  }
  for (double v : x)
    if (!std::isfinite(v)) throw DivergenceError(round, client);
  return x;
}

namespace {

bool computes(const AlgorithmConfig& cfg, const ActiveSet& active, std::size_t client) {
  return cfg.local_compute == LocalCompute::all || active.contains(client);
}

// Shared local phase. `from_global` selects the FedAvg starting point for
// active clients.
RoundOutput local_phase(const FleetState& state, const ActiveSet& active,
                        const AlgorithmConfig& cfg, const Objective& objective,
                        BatchSchedule* batches, bool from_global) {
  const std::size_t m = state.size();
  const std::size_t d = state.dimension();
  if (objective.clients() != m || objective.dimension() != d)
    throw ContractViolation("round: objective shape does not match fleet state");
  for (std::size_t id : active.members)
    if (id >= m) throw ContractViolation("round: active client out of range");
  cfg.validate();

  RoundOutput out{state, DenseMatrix(d, m), std::vector<std::vector<std::size_t>>(m)};
  const double eta = cfg.step_size(state.round);
  Vector gsum;
  for (std::size_t i = 0; i < m; ++i) {
    if (!computes(cfg, active, i)) continue;
    const bool reset = from_global && active.contains(i);
    const Vector start = reset ? state.global : state.clients.column(i);
    if (batches && objective.train_size(i) > 0) out.batches[i] = batches->next(i);
    const Vector x = local_sgd(start, i, cfg.local_steps, eta, objective, out.batches[i],
                               state.round, &gsum);
    out.state.clients.set_column(i, x);
    out.gradient_sums.set_column(i, gsum);
  }
  if (!active.empty()) out.state.global = column_mean(out.state.clients, active.members);
  out.state.round = state.round + 1;
  return out;
}

}  // namespace

RoundOutput fedavg_round(const FleetState& state, const ActiveSet& active,
                         const AlgorithmConfig& cfg, const Objective& objective,
                         BatchSchedule* batches) {
  if (cfg.variant != Algorithm::fedavg) throw ContractViolation("fedavg_round: variant is not fedavg");
  return local_phase(state, active, cfg, objective, batches, true);
}

RoundOutput fedpbc_round(const FleetState& state, const ActiveSet& active,
                         const AlgorithmConfig& cfg, const Objective& objective,
                         BatchSchedule* batches) {
  if (cfg.variant != Algorithm::fedpbc) throw ContractViolation("fedpbc_round: variant is not fedpbc");
  RoundOutput out = local_phase(state, active, cfg, objective, batches, false);
  // Postponed broadcast.
  for (std::size_t i : active.members) out.state.clients.set_column(i, out.state.global);
  return out;
}

RoundOutput run_round(const FleetState& state, const ActiveSet& active,
                      const AlgorithmConfig& cfg, const Objective& objective,
                      BatchSchedule* batches) {
  return cfg.variant == Algorithm::fedavg ? fedavg_round(state, active, cfg, objective, batches)
                                          : fedpbc_round(state, active, cfg, objective, batches);
}

MatrixFormReport matrix_form_check(const FleetState& before, const ActiveSet& active,
                                   const AlgorithmConfig& cfg, const Objective& objective,
                                   const FleetState& after,
                                   std::span<const std::vector<std::size_t>> batches,
                                   double tolerance) {
  if (cfg.variant != Algorithm::fedpbc || cfg.local_compute != LocalCompute::all)
    throw ContractViolation("matrix_form_check: requires fedpbc with local_compute = all");
  const std::size_t d = before.dimension();
  const std::size_t m = before.size();
  const double eta = cfg.step_size(before.round);

  DenseMatrix stepped = before.clients;
  Vector x(d), g(d), sum(d);
  for (std::size_t i = 0; i < m; ++i) {
    x = before.clients.column(i);
    std::fill(sum.begin(), sum.end(), 0.0);
    std::span<const std::size_t> batch;
    if (i < batches.size()) batch = batches[i];
    for (std::size_t k = 0; k < cfg.local_steps; ++k) {
      objective.gradient(i, x, batch, g);
      axpy(1.0, g, sum);
      axpy(-eta, g, x);
    }
    for (std::size_t r = 0; r < d; ++r) stepped(r, i) -= eta * sum[r];
  }
  const DenseMatrix predicted = multiply(stepped, build_mixing(active, m).entries);
  MatrixFormReport rep;
  rep.max_deviation = max_abs_difference(predicted, after.clients);
  rep.pass = rep.max_deviation <= tolerance;
  return rep;
}

Vector evaluation_model(const FleetState& state, Algorithm variant) {
  return variant == Algorithm::fedavg ? state.global : column_mean(state.clients);
}

DenseMatrix starting_models(const FleetState& state, const ActiveSet& active, Algorithm variant) {
  DenseMatrix view = state.clients;
  if (variant == Algorithm::fedavg)
    for (std::size_t i : active.members) view.set_column(i, state.global);
  return view;
}

double consensus_error(const DenseMatrix& models) {
  const Vector mean = column_mean(models);
  double total = 0.0;
  for (std::size_t r = 0; r < models.rows(); ++r) {
    const auto row = models.row(r);
    for (double v : row) {
      const double e = v - mean[r];
      total += e * e;
    }
  }
  return total / static_cast<double>(models.cols());
}

namespace {

MetricsRow measure(const FleetState& state, const ActiveSet& active, const AlgorithmConfig& cfg,
                   const Objective& objective) {
  MetricsRow row;
  row.round = state.round;
  const Vector model = evaluation_model(state, cfg.variant);
  row.grad_norm = global_gradient_norm(objective, model);
  row.consensus_error = consensus_error(starting_models(state, active, cfg.variant));
  row.train_loss = objective.train_loss(model);
  row.test_accuracy = objective.test_accuracy(model);
  row.active_count = active.size();
  return row;
}

}  // namespace

ExperimentResult run_experiment(const AlgorithmConfig& cfg, const Objective& objective,
                                const ActivationTrace& trace, std::span<const double> x0,
                                SeededStream& stream, const RunOptions& options) {
  cfg.validate();
  if (trace.rounds() == 0) throw ConfigError("run_experiment: need at least one round");
  if (trace.clients != objective.clients())
    throw ConfigError("run_experiment: trace client count does not match the objective");
  if (x0.size() != objective.dimension())
    throw ConfigError("run_experiment: x0 dimension does not match the objective");
  const std::size_t every = std::max<std::size_t>(1, options.metrics_every);

  BatchSchedule schedule(objective, options.batch_size, stream.derive("batches"));
  ExperimentResult result;
  result.final_state = FleetState::initial(x0, objective.clients());
  const std::size_t rounds = trace.rounds();
  result.rows.reserve(rounds / every + 1);
  for (std::size_t t = 0; t < rounds; ++t) {
    const ActiveSet& active = trace.active[t];
    if (t % every == 0 || t + 1 == rounds)
      result.rows.push_back(measure(result.final_state, active, cfg, objective));
    try {
      result.final_state = run_round(result.final_state, active, cfg, objective, &schedule).state;
    } catch (const DivergenceError& e) {
      throw DivergedRun(e, std::move(result.rows));
    }
  }
  return result;
}

ExperimentResult run_experiment(const AlgorithmConfig& cfg, const Objective& objective,
                                const LinkProbabilityProcess& process, std::size_t rounds,
                                std::span<const double> x0, SeededStream& stream,
                                const RunOptions& options) {
  SeededStream links = stream.derive("links");
  const ActivationTrace trace = generate_trace(process, rounds, links);
  return run_experiment(cfg, objective, trace, x0, stream, options);
}

}  // namespace fedsim
