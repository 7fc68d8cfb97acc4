#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedsim/numerics.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

/// Inverse-CDF sampler for the Zipf law P(k) = k^-a / zeta(a), k >= 1.
///
/// Partial sums are tabulated until the remaining tail mass drops below
/// 1e-12 (or the table reaches kMaxTable entries, beyond which the tail is
/// inverted through its integral approximation).
class ZipfSampler {
 public:
  static constexpr double kTailCutoff = 1e-12;
  static constexpr std::size_t kMaxTable = std::size_t{1} << 22;

  explicit ZipfSampler(double exponent);

  double exponent() const noexcept { return exponent_; }
  double zeta() const noexcept { return zeta_; }
  /// P(Z = k) for k >= 1.
  double probability(std::size_t k) const;
  std::size_t sample(SeededStream& stream) const;

 private:
  double exponent_;
  double zeta_;
  std::vector<double> cdf_;  // cdf_[k-1] = P(Z <= k)
};

/// Riemann zeta for s > 1: partial sum plus Euler-Maclaurin tail.
double riemann_zeta(double s);

/// Single draw; builds a sampler each call, prefer ZipfSampler for bulk use.
std::size_t zipf_sample(double exponent, SeededStream& stream);

struct StaticLinks {
  Vector p;
};
struct UniformLinks {
  double p;
};
struct ZipfCountLinks {
  double exponent = 3.0;
  std::size_t samples = 20000;
  double floor = 0.1;
};

/// Generator of per-round activation probability vectors p^t.
class LinkProbabilityProcess {
 public:
  using Variant = std::variant<StaticLinks, UniformLinks, ZipfCountLinks>;

  static LinkProbabilityProcess constant(Vector p);
  static LinkProbabilityProcess uniform(double p, std::size_t clients);
  /// First half of the clients at p0, the rest at p1.
  static LinkProbabilityProcess two_group(double p0, double p1, std::size_t clients);
  static LinkProbabilityProcess zipf_count(double exponent, std::size_t samples, double floor,
                                           std::size_t clients);

  std::size_t clients() const noexcept { return clients_; }
  const Variant& variant() const noexcept { return variant_; }
  /// Lower bound c on every emitted probability.
  double floor() const noexcept;
  bool time_varying() const noexcept { return std::holds_alternative<ZipfCountLinks>(variant_); }

  /// p^t. The stream is consumed only by the zipf_count variant.
  Vector probabilities_at(std::size_t round, SeededStream& stream) const;

 private:
  LinkProbabilityProcess(Variant v, std::size_t clients);

  Variant variant_;
  std::size_t clients_;
  std::shared_ptr<const ZipfSampler> sampler_;
};

/// Clients whose link to the server is up in a round.
struct ActiveSet {
  std::size_t round = 0;
  std::vector<std::size_t> members;  // strictly increasing

  bool contains(std::size_t client) const;
  std::size_t size() const noexcept { return members.size(); }
  bool empty() const noexcept { return members.empty(); }
};

/// Independent Bernoulli(p_i) per client.
ActiveSet sample_active_set(std::span<const double> p, std::size_t round, SeededStream& stream);

/// A recorded sequence of (p^t, A^t), replayable across algorithms.
struct ActivationTrace {
  std::size_t clients = 0;
  std::vector<Vector> probabilities;
  std::vector<ActiveSet> active;

  std::size_t rounds() const noexcept { return active.size(); }
  /// Checksum of the CSV serialization.
  std::string checksum() const;
};

/// Draws T rounds from a process. Round t uses stream paths
/// links/probabilities#t and links/active#t under `stream`.
ActivationTrace generate_trace(const LinkProbabilityProcess& process, std::size_t rounds,
                               SeededStream& stream);

/// CSV with header `round,client,p,active`, one row per (round, client).
void write_trace_csv(std::ostream& out, const ActivationTrace& trace);
ActivationTrace read_trace_csv(std::istream& in);

}  // namespace fedsim
