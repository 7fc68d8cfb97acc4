#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "fedsim/algorithms.hpp"
#include "fedsim/link_model.hpp"

namespace fedsim {

enum class ExperimentKind { counterexample, synthetic };
enum class LinkKind { static_p, uniform, two_group, zipf };

std::string_view to_string(ExperimentKind k);
std::string_view to_string(LinkKind k);

/// Fully resolved experiment description. Every field holds a concrete value
/// after parse_config; see README for the key reference and defaults.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::counterexample;
  Algorithm algorithm = Algorithm::fedpbc;
  LocalCompute local_compute = LocalCompute::all;

  std::size_t clients = 100;
  std::size_t dimension = 100;  // counterexample only
  std::size_t local_steps = 30;
  double eta = 0.0003;
  std::size_t rounds = 2000;
  std::size_t batch_size = 32;

  LinkKind link = LinkKind::two_group;
  Vector link_p;          // static: one entry per client; uniform: one entry
  double link_p0 = 0.9;   // two_group
  double link_p1 = 0.1;   // two_group
  double zipf_a = 3.0;
  std::size_t zipf_n = 20000;
  double link_floor = 0.1;

  std::uint64_t seed = 0;
  /// Seed for targets / dataset; equals `seed` unless set.
  std::uint64_t data_seed = 0;
  double scale = 1.0;
  std::string output = ".";

  std::size_t samples_per_client = 250;  // synthetic only
  double alpha = 1.0;                    // synthetic only
  double beta = 1.0;                     // synthetic only
  double target_variance = 0.01;         // counterexample only

  std::optional<std::string> trace_file;
  std::size_t metrics_every = 1;
  std::size_t rho_every = 1;  // 0 disables spectral tracking

  /// Client count after applying `scale`.
  std::size_t scaled_clients() const;
  /// Dimension after applying `scale` (counterexample only).
  std::size_t scaled_dimension() const;
  /// Rounds after applying `scale` (synthetic only; the counterexample keeps T).
  std::size_t scaled_rounds() const;

  AlgorithmConfig algorithm_config() const;
  LinkProbabilityProcess link_process() const;
};

/// Parses `key = value` lines (`#` starts a comment). Unknown keys, missing
/// required keys (experiment, algorithm, seed) and out-of-range values raise
/// ConfigError naming the key and line.
ExperimentConfig parse_config(std::string_view text);

/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Hex FNV-1a of the canonical serialization.
std::string config_hash(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Accepts 1, 1/2, 1/5, 1/10 (as fractions or decimals).
double parse_scale(std::string_view text);
bool is_valid_scale(double scale);
std::size_t apply_scale(std::size_t value, double scale);

/// Comma-separated reals.
Vector parse_real_list(std::string_view text);

}  // namespace fedsim
