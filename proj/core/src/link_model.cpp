#include "fedsim/link_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedsim/errors.hpp"

namespace fedsim {

double riemann_zeta(double s) {
  if (!(s > 1.0)) throw ConfigError("riemann_zeta: exponent must exceed 1");
  constexpr int kTerms = 1000;
  double sum = 0.0;
  for (int k = kTerms; k >= 1; --k) sum += std::pow(static_cast<double>(k), -s);
  const double n = kTerms;
  // Euler-Maclaurin tail for sum_{k>N} k^-s.
  const double tail = std::pow(n, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(n, -s) +
                      s * std::pow(n, -s - 1.0) / 12.0 -
                      s * (s + 1.0) * (s + 2.0) * std::pow(n, -s - 3.0) / 720.0;
  return sum + tail;
}

ZipfSampler::ZipfSampler(double exponent) : exponent_(exponent) {
  if (!(exponent > 1.0) || !std::isfinite(exponent))
    throw ConfigError("zipf: exponent must be > 1 (got " + format_real(exponent) + ")");
  zeta_ = riemann_zeta(exponent);
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t k = 1; k <= kMaxTable; ++k) {
    // Kahan-compensated running sum of k^-a.
    const double term = std::pow(static_cast<double>(k), -exponent) - comp;
    const double next = sum + term;
    comp = (next - sum) - term;
    sum = next;
    cdf_.push_back(sum / zeta_);
    const double tail = std::pow(static_cast<double>(k), 1.0 - exponent) / ((exponent - 1.0) * zeta_);
    if (tail < kTailCutoff) break;
  }
}

double ZipfSampler::probability(std::size_t k) const {
  if (k == 0) return 0.0;
  return std::pow(static_cast<double>(k), -exponent_) / zeta_;
}

std::size_t ZipfSampler::sample(SeededStream& stream) const {
  const double u = stream.uniform();
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  if (it != cdf_.end()) return static_cast<std::size_t>(it - cdf_.begin()) + 1;
  // Beyond the table: invert tail(k) ~ k^(1-a) / ((a-1) zeta).
  const double mass = std::max(1.0 - u, 1e-300);
  const double k = std::pow(mass * (exponent_ - 1.0) * zeta_, -1.0 / (exponent_ - 1.0));
  const double lo = static_cast<double>(cdf_.size() + 1);
  return static_cast<std::size_t>(std::min(std::max(std::ceil(k), lo), 1e18));
}

std::size_t zipf_sample(double exponent, SeededStream& stream) {
  return ZipfSampler(exponent).sample(stream);
}

LinkProbabilityProcess::LinkProbabilityProcess(Variant v, std::size_t clients)
    : variant_(std::move(v)), clients_(clients) {
  if (clients_ == 0) throw ConfigError("link process: client count must be >= 1");
  if (auto* z = std::get_if<ZipfCountLinks>(&variant_)) {
    if (!(z->floor > 0.0 && z->floor <= 1.0))
      throw ConfigError("link process: zipf floor must lie in (0, 1]");
    if (z->samples == 0) throw ConfigError("link process: zipf sample count must be >= 1");
    sampler_ = std::make_shared<const ZipfSampler>(z->exponent);
  }
}

LinkProbabilityProcess LinkProbabilityProcess::constant(Vector p) {
  for (double v : p)
    if (!(v > 0.0 && v <= 1.0))
      throw ConfigError("link process: static probabilities must lie in (0, 1]");
  const std::size_t m = p.size();
  return LinkProbabilityProcess(StaticLinks{std::move(p)}, m);
}

LinkProbabilityProcess LinkProbabilityProcess::uniform(double p, std::size_t clients) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("link process: uniform p must lie in (0, 1]");
  return LinkProbabilityProcess(UniformLinks{p}, clients);
}

LinkProbabilityProcess LinkProbabilityProcess::two_group(double p0, double p1,
                                                         std::size_t clients) {
  Vector p(clients);
  for (std::size_t i = 0; i < clients; ++i) p[i] = i < clients / 2 ? p0 : p1;
  if (clients == 0) throw ConfigError("link process: client count must be >= 1");
  return constant(std::move(p));
}

LinkProbabilityProcess LinkProbabilityProcess::zipf_count(double exponent, std::size_t samples,
                                                          double floor, std::size_t clients) {
  return LinkProbabilityProcess(ZipfCountLinks{exponent, samples, floor}, clients);
}

double LinkProbabilityProcess::floor() const noexcept {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, StaticLinks>) {
          return v.p.empty() ? 1.0 : *std::min_element(v.p.begin(), v.p.end());
        } else if constexpr (std::is_same_v<T, UniformLinks>) {
          return v.p;
        } else {
          return v.floor;
        }
      },
      variant_);
}

Vector LinkProbabilityProcess::probabilities_at(std::size_t /*round*/, SeededStream& stream) const {
  return std::visit(
      [&](const auto& v) -> Vector {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, StaticLinks>) {
          return v.p;
        } else if constexpr (std::is_same_v<T, UniformLinks>) {
          return Vector(clients_, v.p);
        } else {
          std::vector<std::size_t> counts(clients_, 0);
          for (std::size_t draw = 0; draw < v.samples; ++draw) {
            const std::size_t rank = sampler_->sample(stream);
            if (rank <= clients_) ++counts[rank - 1];
          }
          std::size_t total = 0;
          for (auto c : counts) total += c;
          Vector p(clients_, 0.0);
          for (std::size_t i = 0; i < clients_; ++i) {
            const double raw = total == 0 ? 0.0
                                          : static_cast<double>(counts[i]) /
                                                static_cast<double>(total);
            p[i] = std::clamp(raw, v.floor, 1.0);
          }
          return p;
        }
      },
      variant_);
}

bool ActiveSet::contains(std::size_t client) const {
  return std::binary_search(members.begin(), members.end(), client);
}

ActiveSet sample_active_set(std::span<const double> p, std::size_t round, SeededStream& stream) {
  ActiveSet set;
  set.round = round;
  for (std::size_t i = 0; i < p.size(); ++i) {
    // Always draw, so the stream position does not depend on p.
    const double u = stream.uniform();
    if (u < p[i]) set.members.push_back(i);
  }
  return set;
}

ActivationTrace generate_trace(const LinkProbabilityProcess& process, std::size_t rounds,
                               SeededStream& stream) {
  ActivationTrace trace;
  trace.clients = process.clients();
  trace.probabilities.reserve(rounds);
  trace.active.reserve(rounds);
  SeededStream prob_root = stream.derive("probabilities");
  SeededStream active_root = stream.derive("active");
  for (std::size_t t = 0; t < rounds; ++t) {
    SeededStream ps = prob_root.derive(t);
    trace.probabilities.push_back(process.probabilities_at(t, ps));
    SeededStream as = active_root.derive(t);
    trace.active.push_back(sample_active_set(trace.probabilities.back(), t, as));
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const ActivationTrace& trace) {
  out << "round,client,p,active\n";
  for (std::size_t t = 0; t < trace.rounds(); ++t) {
    const auto& p = trace.probabilities[t];
    const auto& a = trace.active[t];
    for (std::size_t i = 0; i < trace.clients; ++i)
      out << t << ',' << i << ',' << format_real(p[i]) << ',' << (a.contains(i) ? 1 : 0) << '\n';
  }
}

ActivationTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "round,client,p,active")
    throw ConfigError("trace csv: expected header 'round,client,p,active'");
  ActivationTrace trace;
  std::size_t line_no = 1;
  std::size_t max_client = 0;
  bool any = false;
  struct Row {
    std::size_t t, i;
    double p;
    int active;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Row r{};
    char tail = 0;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%d%c", &r.t, &r.i, &r.p, &r.active, &tail) != 4 ||
        (r.active != 0 && r.active != 1) || !(r.p >= 0.0 && r.p <= 1.0))
      throw ConfigError("trace csv: malformed row at line " + std::to_string(line_no));
    max_client = std::max(max_client, r.i);
    any = true;
    rows.push_back(r);
  }
  if (!any) return trace;
  trace.clients = max_client + 1;
  std::size_t rounds = rows.size() / trace.clients;
  if (rounds * trace.clients != rows.size())
    throw ConfigError("trace csv: row count is not rounds x clients");
  trace.probabilities.assign(rounds, Vector(trace.clients, 0.0));
  trace.active.resize(rounds);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Row& r = rows[k];
    if (r.t != k / trace.clients || r.i != k % trace.clients)
      throw ConfigError("trace csv: rows must be ordered by (round, client); line " +
                        std::to_string(k + 2));
    trace.probabilities[r.t][r.i] = r.p;
    trace.active[r.t].round = r.t;
    if (r.active) trace.active[r.t].members.push_back(r.i);
  }
  return trace;
}

std::string ActivationTrace::checksum() const {
  std::ostringstream os;
  write_trace_csv(os, *this);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(os.str())));
  return buf;
}

}  // namespace fedsim
