#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

/// Hierarchical deterministic random stream.
///
/// A stream is identified by (root_seed, path). Two streams with the same
/// identity produce the same sequence; children are derived by appending a
/// label to the path. A stream is single-owner: once it has been split it can
/// no longer draw, and once it has drawn it can no longer be split. Both
/// misuses raise ContractViolation.
///
/// The engine is std::mt19937_64 seeded through std::seed_seq from the root
/// seed and a 64-bit hash of the path; uniform, normal and Bernoulli variates
/// are produced by fixed transforms so output is identical across standard
/// library implementations.
class SeededStream {
 public:
  static constexpr std::string_view kGeneratorId = "mt19937_64+seed_seq/path-splitmix64/v1";

  explicit SeededStream(std::uint64_t root_seed);

  SeededStream derive(std::string_view label);
  SeededStream derive(std::uint64_t index);
  SeededStream derive(std::string_view label, std::uint64_t index);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Standard normal via Box-Muller (one variate per two uniforms).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n) by rejection; n >= 1.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t root_seed() const noexcept { return root_seed_; }
  const std::vector<std::string>& path() const noexcept { return path_; }
  std::string path_string() const;

 private:
  SeededStream(std::uint64_t root_seed, std::vector<std::string> path, std::uint64_t key);
  void check_can_draw() const;

  std::uint64_t root_seed_;
  std::vector<std::string> path_;
  std::uint64_t path_key_;
  std::mt19937_64 engine_;
  bool split_ = false;
  bool drawn_ = false;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over a byte string.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace fedsim
