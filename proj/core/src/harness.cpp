#include "fedsim/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/mixing.hpp"
#include "fedsim/numerics.hpp"
#include "fedsim/oracles.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

// Runs tasks 0..n-1 on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

json optional_real(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.round << ',' << format_real(r.grad_norm) << ',' << format_real(r.consensus_error) << ','
        << format_real(r.train_loss) << ',';
    if (r.test_accuracy) out << format_real(*r.test_accuracy);
    out << ',' << r.active_count << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw Error("metrics csv: unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != 6) throw Error("metrics csv: expected 6 columns in '" + line + "'");
    MetricsRow r;
    r.round = std::stoull(cells[0]);
    r.grad_norm = std::stod(cells[1]);
    r.consensus_error = std::stod(cells[2]);
    r.train_loss = std::stod(cells[3]);
    if (!cells[4].empty()) r.test_accuracy = std::stod(cells[4]);
    r.active_count = std::stoull(cells[5]);
    rows.push_back(r);
  }
  return rows;
}

FederatedDataset make_dataset(double alpha, double beta, std::size_t clients, std::uint64_t seed,
                              std::size_t samples_per_client) {
  SeededStream root(seed);
  SeededStream data = root.derive("data");
  SyntheticOptions opts;
  opts.samples_per_client = samples_per_client;
  return generate_synthetic(alpha, beta, clients, data, opts);
}

std::unique_ptr<Objective> make_objective(const ExperimentConfig& config) {
  const std::size_t m = config.scaled_clients();
  if (config.experiment == ExperimentKind::synthetic)
    return std::make_unique<SoftmaxObjective>(
        make_dataset(config.alpha, config.beta, m, config.data_seed, config.samples_per_client));
  SeededStream root(config.data_seed);
  SeededStream targets = root.derive("targets");
  return std::make_unique<QuadraticObjective>(
      counterexample_targets(config.scaled_dimension(), m, config.target_variance, targets));
}

ActivationTrace make_trace(const ExperimentConfig& config) {
  const std::size_t m = config.scaled_clients();
  const std::size_t rounds = config.scaled_rounds();
  if (config.trace_file) {
    std::ifstream in(*config.trace_file, std::ios::binary);
    if (!in) throw ConfigError("key 'trace_file': cannot open " + *config.trace_file);
    ActivationTrace t = read_trace_csv(in);
    if (t.clients != m)
      throw ConfigError("key 'trace_file': trace has " + std::to_string(t.clients) +
                        " clients, config has " + std::to_string(m));
    if (t.rounds() < rounds)
      throw ConfigError("key 'trace_file': trace has only " + std::to_string(t.rounds()) + " rounds");
    t.active.resize(rounds);
    t.probabilities.resize(rounds);
    return t;
  }
  SeededStream root(config.seed);
  SeededStream links = root.derive("links");
  return generate_trace(config.link_process(), rounds, links);
}

std::string apply_seed_override(ExperimentConfig& config) {
  const char* env = std::getenv("FEDSIM_SEED");
  if (!env || !*env) return "config";
  std::uint64_t seed = 0;
  try {
    std::size_t used = 0;
    seed = std::stoull(env, &used);
    if (used != std::string(env).size()) throw ConfigError("");
  } catch (const std::exception&) {
    throw ConfigError(std::string("FEDSIM_SEED: not an unsigned integer: '") + env + "'");
  }
  if (config.data_seed == config.seed) config.data_seed = seed;
  config.seed = seed;
  return "env:FEDSIM_SEED";
}

SimulationOutcome cmd_simulate(const ExperimentConfig& config, const fs::path& directory,
                               const SimulateOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  fs::create_directories(directory);

  SimulationOutcome outcome;
  outcome.directory = directory;
  outcome.config_hash = config_hash(config);

  auto objective = make_objective(config);
  const ActivationTrace trace = make_trace(config);
  outcome.trace_checksum = trace.checksum();
  if (options.write_trace) {
    auto out = open_out(directory / "trace.csv");
    write_trace_csv(out, trace);
  }

  const AlgorithmConfig algo = config.algorithm_config();
  const Vector x0(objective->dimension(), 0.0);
  RunOptions run_options;
  run_options.batch_size = config.batch_size;
  run_options.metrics_every = config.metrics_every;

  std::optional<std::size_t> failure_client;
  {
    SeededStream root(config.seed);
    SeededStream run = root.derive("run");
    try {
      ExperimentResult result = run_experiment(algo, *objective, trace, x0, run, run_options);
      outcome.rows = std::move(result.rows);
      outcome.final_state = std::move(result.final_state);
    } catch (const DivergedRun& e) {
      outcome.diverged = true;
      outcome.exit_code = 3;
      outcome.failure_round = e.round();
      failure_client = e.client();
      outcome.rows = e.rows();
    }
  }

  if (outcome.final_state) {
    const Vector x = evaluation_model(*outcome.final_state, config.algorithm);
    outcome.final_grad_norm = global_gradient_norm(*objective, x);
    outcome.final_train_loss = objective->train_loss(x);
    outcome.final_test_accuracy = objective->test_accuracy(x);
  }

  {
    auto out = open_out(directory / "metrics.csv");
    write_metrics_csv(out, outcome.rows);
  }

  json spectral = nullptr;
  if (config.rho_every > 0) {
    const double floor = config.link_process().floor();
    RhoTracker tracker(floor, trace.clients);
    try {
      for (std::size_t t = 0; t < trace.rounds(); t += config.rho_every)
        tracker.observe(trace.probabilities[t]);
      spectral = json{{"floor", floor},
                      {"bound", tracker.bound()},
                      {"rho_last", tracker.last()},
                      {"rho_max", tracker.running_max()},
                      {"rho_product", tracker.product()},
                      {"rounds_observed", tracker.rounds()},
                      {"stride", config.rho_every}};
    } catch (const SolverError& e) {
      spectral = json{{"error", e.what()}, {"residual", e.residual()}};
    }
  }

  const std::size_t completed =
      outcome.failure_round ? *outcome.failure_round : trace.rounds();
  json manifest;
  manifest["artifact"] = "fedsim";
  manifest["version"] = FEDSIM_VERSION;
  manifest["config_hash"] = outcome.config_hash;
  manifest["config"] = serialize_config(config);
  manifest["root_seed"] = config.seed;
  manifest["data_seed"] = config.data_seed;
  manifest["seed_source"] = options.seed_source;
  manifest["prng"] = std::string(SeededStream::kGeneratorId);
  manifest["start_round"] = 0;
  manifest["end_round"] = completed;
  manifest["rounds_requested"] = trace.rounds();
  manifest["status"] = outcome.diverged ? "diverged" : "completed";
  manifest["failure_round"] = outcome.failure_round ? json(*outcome.failure_round) : json(nullptr);
  manifest["failure_client"] = failure_client ? json(*failure_client) : json(nullptr);
  manifest["trace_checksum"] = outcome.trace_checksum;
  manifest["trace_source"] = config.trace_file ? *config.trace_file : std::string("generated");
  manifest["spectral"] = spectral;
  if (outcome.final_state)
    manifest["final"] = json{{"grad_norm", outcome.final_grad_norm},
                             {"train_loss", outcome.final_train_loss},
                             {"test_accuracy", optional_real(outcome.final_test_accuracy)}};
  else
    manifest["final"] = nullptr;
  manifest["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  {
    auto out = open_out(directory / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
  return outcome;
}

namespace {

std::string run_name(Algorithm a, LocalCompute c) {
  return std::string(to_string(a)) + "_" + std::string(to_string(c));
}

std::string grid_name(double p0, double p1) {
  std::ostringstream s;
  s << "p0_" << p0 << "_p1_" << p1;
  return s.str();
}

}  // namespace

std::vector<Fig2Row> cmd_reproduce_fig2(double scale, const fs::path& directory,
                                        const ReproduceOptions& options) {
  if (!is_valid_scale(scale)) throw ConfigError("scale must be one of 1, 1/2, 1/5, 1/10");
  if (options.seeds < 1) throw ConfigError("seeds must be >= 1");
  const std::vector<std::pair<double, double>> grid = {{0.9, 0.9}, {0.9, 0.5}, {0.9, 0.1}, {0.5, 0.1}};
  const std::vector<std::pair<Algorithm, LocalCompute>> variants = {
      {Algorithm::fedavg, LocalCompute::all},
      {Algorithm::fedpbc, LocalCompute::all},
      {Algorithm::fedavg, LocalCompute::active_only},
      {Algorithm::fedpbc, LocalCompute::active_only}};

  ExperimentConfig base;
  base.experiment = ExperimentKind::counterexample;
  base.scale = scale;
  base.data_seed = options.base_seed;
  base.link = LinkKind::two_group;
  base.rho_every = 1;

  struct Job {
    std::size_t row;
    ExperimentConfig config;
    fs::path dir;
  };
  std::vector<Fig2Row> rows;
  std::vector<Job> jobs;
  for (auto [p0, p1] : grid) {
    for (auto [algo, compute] : variants) {
      Fig2Row r;
      r.p0 = p0;
      r.p1 = p1;
      r.algorithm = algo;
      r.local_compute = compute;
      rows.push_back(r);
      for (std::size_t k = 0; k < options.seeds; ++k) {
        ExperimentConfig c = base;
        c.algorithm = algo;
        c.local_compute = compute;
        c.link_p0 = p0;
        c.link_p1 = p1;
        c.seed = options.base_seed + k;
        c.output = (directory / grid_name(p0, p1) / run_name(algo, compute) /
                    ("seed_" + std::to_string(c.seed)))
                       .string();
        jobs.push_back({rows.size() - 1, c, c.output});
      }
    }
  }

  // Shared targets: every run uses data_seed = base_seed.
  auto reference = make_objective(base);
  const auto& quad = dynamic_cast<const QuadraticObjective&>(*reference);
  const Vector optimum = quad_global_optimum(quad);
  const double initial = global_gradient_norm(quad, Vector(quad.dimension(), 0.0));

  std::vector<double> finals(jobs.size(), 0.0);
  std::vector<char> diverged(jobs.size(), 0);
  parallel_for(jobs.size(), options.jobs, [&](std::size_t i) {
    SimulateOptions so;
    so.seed_source = "reproduce-fig2";
    auto out = cmd_simulate(jobs[i].config, jobs[i].dir, so);
    finals[i] = out.final_grad_norm;
    diverged[i] = out.diverged;
  });

  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& row = rows[r];
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].row != r) continue;
      if (diverged[i]) {
        ++row.diverged;
        continue;
      }
      sum += finals[i];
      ++n;
    }
    row.mean_final_grad_norm = n ? sum / static_cast<double>(n) : std::nan("");
    row.initial_grad_norm = initial;
    const auto p = LinkProbabilityProcess::two_group(row.p0, row.p1, quad.clients());
    const auto& sp = std::get<StaticLinks>(p.variant()).p;
    const Vector point = predicted_limit(fedavg_limit_integral(sp), quad.targets());
    row.oracle_bias_norm = std::sqrt(squared_distance(point, optimum));
  }

  fs::create_directories(directory);
  auto out = open_out(directory / "comparison.csv");
  out << "p0,p1,algorithm,local_compute,seeds,diverged,initial_grad_norm,mean_final_grad_norm,"
         "oracle_bias_norm,ratio_to_oracle\n";
  for (const auto& r : rows) {
    out << format_real(r.p0) << ',' << format_real(r.p1) << ',' << to_string(r.algorithm) << ','
        << to_string(r.local_compute) << ',' << options.seeds << ',' << r.diverged << ','
        << format_real(r.initial_grad_norm) << ',' << format_real(r.mean_final_grad_norm) << ','
        << format_real(r.oracle_bias_norm) << ','
        << format_real(r.oracle_bias_norm > 0 ? r.mean_final_grad_norm / r.oracle_bias_norm : 0.0)
        << '\n';
  }
  return rows;
}

std::vector<Fig3Row> cmd_reproduce_fig3(double scale, const fs::path& directory,
                                        const ReproduceOptions& options) {
  if (!is_valid_scale(scale)) throw ConfigError("scale must be one of 1, 1/2, 1/5, 1/10");
  if (options.seeds < 1) throw ConfigError("seeds must be >= 1");

  ExperimentConfig base;
  base.experiment = ExperimentKind::synthetic;
  base.clients = 150;
  base.dimension = kSoftmaxDimension;
  base.local_steps = 10;
  base.eta = 0.005;
  base.rounds = 3000;
  base.batch_size = 32;
  base.link = LinkKind::zipf;
  base.scale = scale;
  // Zipf p^t changes every round; sample the spectral diagnostic sparsely.
  base.rho_every = 50;
  base.metrics_every = 10;

  struct Job {
    Algorithm algorithm;
    ExperimentConfig config;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < options.seeds; ++k) {
    for (Algorithm a : {Algorithm::fedavg, Algorithm::fedpbc}) {
      ExperimentConfig c = base;
      c.algorithm = a;
      c.seed = options.base_seed + k;
      c.data_seed = c.seed;
      c.output = (directory / std::string(to_string(a)) / ("seed_" + std::to_string(c.seed))).string();
      jobs.push_back({a, c});
    }
  }
  std::vector<Fig3Row> rows(jobs.size());
  parallel_for(jobs.size(), options.jobs, [&](std::size_t i) {
    SimulateOptions so;
    so.seed_source = "reproduce-fig3";
    auto out = cmd_simulate(jobs[i].config, jobs[i].config.output, so);
    rows[i].algorithm = jobs[i].algorithm;
    rows[i].seed = jobs[i].config.seed;
    rows[i].diverged = out.diverged;
    rows[i].final_train_loss = out.diverged ? std::nan("") : out.final_train_loss;
    rows[i].final_test_accuracy = out.final_test_accuracy.value_or(std::nan(""));
  });

  fs::create_directories(directory);
  auto out = open_out(directory / "summary.csv");
  out << "algorithm,seed,diverged,final_train_loss,final_test_accuracy\n";
  for (const auto& r : rows)
    out << to_string(r.algorithm) << ',' << r.seed << ',' << (r.diverged ? 1 : 0) << ','
        << format_real(r.final_train_loss) << ',' << format_real(r.final_test_accuracy) << '\n';
  for (Algorithm a : {Algorithm::fedavg, Algorithm::fedpbc}) {
    double loss = 0.0, acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows)
      if (r.algorithm == a && !r.diverged) {
        loss += r.final_train_loss;
        acc += r.final_test_accuracy;
        ++n;
      }
    out << to_string(a) << ",mean,0," << format_real(n ? loss / n : std::nan("")) << ','
        << format_real(n ? acc / n : std::nan("")) << '\n';
  }
  return rows;
}

std::string cmd_mixing(const Vector& p) {
  if (p.empty()) throw ConfigError("mixing: empty probability vector");
  const auto m = expected_square_exact(p);
  const double c = *std::min_element(p.begin(), p.end());
  const double r = rho(m);
  const double bound = ergodicity_bound(c, p.size());
  double min_entry = m.entries(0, 0);
  for (double v : m.entries.entries()) min_entry = std::min(min_entry, v);
  const double entry_bound = entry_lower_bound(c, p.size());
  json line{{"m", p.size()},
            {"floor", c},
            {"rho", r},
            {"bound", bound},
            {"min_entry", min_entry},
            {"entry_bound", entry_bound},
            {"pass", r <= bound && min_entry >= entry_bound * (1.0 - 1e-12)}};
  return line.dump();
}

std::vector<std::string> cmd_oracle(const Vector& p, const std::optional<DenseMatrix>& targets,
                                    std::size_t mc_trials, std::uint64_t seed) {
  if (p.empty()) throw ConfigError("oracle: empty probability vector");
  if (targets && targets->cols() != p.size())
    throw ConfigError("oracle: targets have " + std::to_string(targets->cols()) +
                      " clients, p has " + std::to_string(p.size()));
  std::vector<LimitWeights> results;
  if (p.size() <= 20) results.push_back(fedavg_limit_subset(p));
  results.push_back(fedavg_limit_integral(p));
  if (mc_trials > 0) {
    SeededStream root(seed);
    SeededStream s = root.derive("oracle-mc");
    results.push_back(fedavg_limit_mc(p, mc_trials, s));
  }
  std::vector<std::string> lines;
  Vector optimum;
  if (targets) optimum = column_mean(*targets);
  for (const auto& w : results) {
    json line{{"method", std::string(to_string(w.method))}, {"weights", w.w}};
    if (!w.standard_error.empty()) line["standard_error"] = w.standard_error;
    if (targets) {
      const Vector point = predicted_limit(w, *targets);
      line["predicted_point"] = point;
      line["bias_norm"] = std::sqrt(squared_distance(point, optimum));
    }
    lines.push_back(line.dump());
  }
  return lines;
}

Vector read_real_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  for (char& ch : text)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '\t') ch = ' ';
  std::istringstream items(text);
  Vector out;
  std::string tok;
  while (items >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ConfigError(path.string() + ": not a real number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

DenseMatrix read_targets_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<Vector> columns;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    columns.push_back(parse_real_list(line));
    if (columns.back().size() != columns.front().size())
      throw ConfigError(path.string() + ": ragged target rows");
  }
  if (columns.empty()) throw ConfigError(path.string() + ": no targets");
  DenseMatrix t(columns.front().size(), columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) t.set_column(i, columns[i]);
  return t;
}

}  // namespace fedsim
