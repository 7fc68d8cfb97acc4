#include "fedsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

std::string_view to_string(ExperimentKind k) {
  return k == ExperimentKind::counterexample ? "counterexample" : "synthetic";
}

std::string_view to_string(LinkKind k) {
  switch (k) {
    case LinkKind::static_p: return "static";
    case LinkKind::uniform: return "uniform";
    case LinkKind::two_group: return "two_group";
    case LinkKind::zipf: return "zipf";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

struct Entry {
  std::string value;
  std::size_t line;
};

[[noreturn]] void fail(const std::string& key, std::size_t line, const std::string& msg) {
  std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
  throw ConfigError(where + "key '" + key + "': " + msg);
}

double to_real(const std::string& key, const Entry& e) {
  double v = 0.0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    fail(key, e.line, "expected a finite real, got '" + e.value + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, const Entry& e) {
  std::uint64_t v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    fail(key, e.line, "expected a non-negative integer, got '" + e.value + "'");
  return v;
}

std::size_t to_count(const std::string& key, const Entry& e) {
  auto v = to_u64(key, e);
  if (v < 1) fail(key, e.line, "must be >= 1");
  return static_cast<std::size_t>(v);
}

double to_probability(const std::string& key, const Entry& e) {
  double v = to_real(key, e);
  if (!(v > 0.0 && v <= 1.0)) fail(key, e.line, "must lie in (0, 1]");
  return v;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "experiment", "algorithm",  "local_compute", "m",          "d",
      "s",          "eta",        "rounds",        "batch_size", "link",
      "link_p",     "link_p0",    "link_p1",       "zipf_a",     "zipf_n",
      "link_floor", "seed",       "scale",         "output",     "samples_per_client",
      "alpha",      "beta",       "target_variance", "trace_file", "metrics_every",
      "rho_every",  "data_seed"};
  return keys;
}

}  // namespace

bool is_valid_scale(double scale) {
  for (double s : {1.0, 0.5, 0.2, 0.1})
    if (std::abs(scale - s) <= 1e-12) return true;
  return false;
}

double parse_scale(std::string_view text) {
  std::string t = trim(text);
  double v = 0.0;
  auto slash = t.find('/');
  try {
    if (slash != std::string::npos) {
      double num = std::stod(t.substr(0, slash));
      double den = std::stod(t.substr(slash + 1));
      if (den == 0.0) throw ConfigError("zero denominator");
      v = num / den;
    } else {
      std::size_t used = 0;
      v = std::stod(t, &used);
      if (used != t.size()) throw ConfigError("trailing characters");
    }
  } catch (const std::exception&) {
    throw ConfigError("scale: cannot parse '" + t + "'");
  }
  for (double s : {1.0, 0.5, 0.2, 0.1})
    if (std::abs(v - s) <= 1e-12) return s;
  throw ConfigError("scale must be one of 1, 1/2, 1/5, 1/10; got '" + t + "'");
}

std::size_t apply_scale(std::size_t value, double scale) {
  auto v = static_cast<std::size_t>(std::llround(static_cast<double>(value) * scale));
  return v < 1 ? 1 : v;
}

Vector parse_real_list(std::string_view text) {
  Vector out;
  std::string s(text);
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    std::string item = trim(std::string_view(s).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    if (item.empty()) throw ConfigError("empty entry in list '" + s + "'");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError("not a real number: '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::size_t ExperimentConfig::scaled_clients() const { return apply_scale(clients, scale); }

std::size_t ExperimentConfig::scaled_dimension() const { return apply_scale(dimension, scale); }

std::size_t ExperimentConfig::scaled_rounds() const {
  return experiment == ExperimentKind::synthetic ? apply_scale(rounds, scale) : rounds;
}

AlgorithmConfig ExperimentConfig::algorithm_config() const {
  AlgorithmConfig c;
  c.variant = algorithm;
  c.local_compute = local_compute;
  c.local_steps = local_steps;
  c.eta = eta;
  return c;
}

LinkProbabilityProcess ExperimentConfig::link_process() const {
  std::size_t m = scaled_clients();
  switch (link) {
    case LinkKind::static_p:
      if (link_p.size() != m)
        throw ConfigError("key 'link_p': static link needs " + std::to_string(m) +
                          " probabilities, got " + std::to_string(link_p.size()));
      return LinkProbabilityProcess::constant(link_p);
    case LinkKind::uniform:
      return LinkProbabilityProcess::uniform(link_p.at(0), m);
    case LinkKind::two_group:
      return LinkProbabilityProcess::two_group(link_p0, link_p1, m);
    case LinkKind::zipf:
      return LinkProbabilityProcess::zipf_count(zipf_a, zipf_n, link_floor, m);
  }
  throw ConfigError("unknown link kind");
}

ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  const auto& keys = known_keys();
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      fail(key, line_no, "unknown key");
    if (value.empty()) fail(key, line_no, "empty value");
    if (entries.count(key)) fail(key, line_no, "duplicate key");
    entries.emplace(key, Entry{value, line_no});
  }

  for (const char* req : {"experiment", "algorithm", "seed"})
    if (!entries.count(req)) fail(req, 0, "required key missing");

  auto has = [&](const char* k) { return entries.count(k) > 0; };
  auto get = [&](const char* k) -> const Entry& { return entries.at(k); };

  ExperimentConfig c;
  {
    const auto& e = get("experiment");
    if (e.value == "counterexample") c.experiment = ExperimentKind::counterexample;
    else if (e.value == "synthetic") c.experiment = ExperimentKind::synthetic;
    else fail("experiment", e.line, "expected counterexample or synthetic");
  }
  {
    const auto& e = get("algorithm");
    if (e.value == "fedavg") c.algorithm = Algorithm::fedavg;
    else if (e.value == "fedpbc") c.algorithm = Algorithm::fedpbc;
    else fail("algorithm", e.line, "expected fedavg or fedpbc");
  }
  c.seed = to_u64("seed", get("seed"));
  c.data_seed = has("data_seed") ? to_u64("data_seed", get("data_seed")) : c.seed;

  const bool synth = c.experiment == ExperimentKind::synthetic;
  if (synth) {
    c.clients = 150;
    c.dimension = kSoftmaxDimension;
    c.local_steps = 10;
    c.eta = 0.005;
    c.rounds = 3000;
    c.link = LinkKind::zipf;
  }

  if (has("local_compute")) {
    const auto& e = get("local_compute");
    if (e.value == "all") c.local_compute = LocalCompute::all;
    else if (e.value == "active_only") c.local_compute = LocalCompute::active_only;
    else fail("local_compute", e.line, "expected all or active_only");
  }
  if (has("m")) c.clients = to_count("m", get("m"));
  if (has("d")) {
    if (synth) fail("d", get("d").line, "fixed by the softmax model for synthetic runs");
    c.dimension = to_count("d", get("d"));
  }
  if (has("s")) c.local_steps = to_count("s", get("s"));
  if (has("eta")) {
    c.eta = to_real("eta", get("eta"));
    if (!(c.eta > 0.0)) fail("eta", get("eta").line, "must be > 0");
  }
  if (has("rounds")) c.rounds = to_count("rounds", get("rounds"));
  if (has("batch_size")) c.batch_size = to_count("batch_size", get("batch_size"));
  if (has("metrics_every")) c.metrics_every = to_count("metrics_every", get("metrics_every"));
  if (has("rho_every")) c.rho_every = static_cast<std::size_t>(to_u64("rho_every", get("rho_every")));

  if (has("link")) {
    const auto& e = get("link");
    if (e.value == "static") c.link = LinkKind::static_p;
    else if (e.value == "uniform") c.link = LinkKind::uniform;
    else if (e.value == "two_group") c.link = LinkKind::two_group;
    else if (e.value == "zipf") c.link = LinkKind::zipf;
    else fail("link", e.line, "expected static, uniform, two_group or zipf");
  }

  // Link parameters only make sense for their own link kind.
  auto reject_unless = [&](const char* key, bool ok) {
    if (has(key) && !ok)
      fail(key, get(key).line, std::string("not used by link = ") + std::string(to_string(c.link)));
  };
  reject_unless("link_p", c.link == LinkKind::static_p || c.link == LinkKind::uniform);
  reject_unless("link_p0", c.link == LinkKind::two_group);
  reject_unless("link_p1", c.link == LinkKind::two_group);
  reject_unless("zipf_a", c.link == LinkKind::zipf);
  reject_unless("zipf_n", c.link == LinkKind::zipf);
  reject_unless("link_floor", c.link == LinkKind::zipf);

  switch (c.link) {
    case LinkKind::static_p:
    case LinkKind::uniform: {
      if (!has("link_p")) fail("link_p", 0, "required for this link kind");
      const auto& e = get("link_p");
      try {
        c.link_p = parse_real_list(e.value);
      } catch (const ConfigError& err) {
        fail("link_p", e.line, err.what());
      }
      for (double p : c.link_p)
        if (!(p > 0.0 && p <= 1.0)) fail("link_p", e.line, "entries must lie in (0, 1]");
      if (c.link == LinkKind::uniform && c.link_p.size() != 1)
        fail("link_p", e.line, "uniform link takes a single probability");
      break;
    }
    case LinkKind::two_group:
      if (has("link_p0")) c.link_p0 = to_probability("link_p0", get("link_p0"));
      if (has("link_p1")) c.link_p1 = to_probability("link_p1", get("link_p1"));
      break;
    case LinkKind::zipf:
      if (has("zipf_a")) {
        c.zipf_a = to_real("zipf_a", get("zipf_a"));
        if (!(c.zipf_a > 1.0)) fail("zipf_a", get("zipf_a").line, "must be > 1");
      }
      if (has("zipf_n")) c.zipf_n = to_count("zipf_n", get("zipf_n"));
      if (has("link_floor")) c.link_floor = to_probability("link_floor", get("link_floor"));
      break;
  }

  if (has("scale")) {
    const auto& e = get("scale");
    try {
      c.scale = parse_scale(e.value);
    } catch (const ConfigError& err) {
      fail("scale", e.line, err.what());
    }
  }
  if (has("output")) c.output = get("output").value;
  if (has("trace_file")) c.trace_file = get("trace_file").value;

  auto only_for = [&](const char* key, bool ok, const char* what) {
    if (has(key) && !ok) fail(key, get(key).line, std::string("only valid for ") + what);
  };
  only_for("samples_per_client", synth, "synthetic runs");
  only_for("alpha", synth, "synthetic runs");
  only_for("beta", synth, "synthetic runs");
  only_for("target_variance", !synth, "counterexample runs");
  if (has("samples_per_client"))
    c.samples_per_client = to_count("samples_per_client", get("samples_per_client"));
  if (has("alpha")) {
    c.alpha = to_real("alpha", get("alpha"));
    if (c.alpha < 0.0) fail("alpha", get("alpha").line, "must be >= 0");
  }
  if (has("beta")) {
    c.beta = to_real("beta", get("beta"));
    if (c.beta < 0.0) fail("beta", get("beta").line, "must be >= 0");
  }
  if (has("target_variance")) {
    c.target_variance = to_real("target_variance", get("target_variance"));
    if (c.target_variance < 0.0) fail("target_variance", get("target_variance").line, "must be >= 0");
  }

  if (c.link == LinkKind::static_p && c.link_p.size() != c.scaled_clients())
    fail("link_p", get("link_p").line,
         "static link needs one probability per client (" + std::to_string(c.scaled_clients()) + ")");
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << '\n'; };
  auto real = [](double v) { return format_real(v); };
  kv("experiment", std::string(to_string(c.experiment)));
  kv("algorithm", std::string(to_string(c.algorithm)));
  kv("local_compute", std::string(to_string(c.local_compute)));
  kv("seed", std::to_string(c.seed));
  kv("data_seed", std::to_string(c.data_seed));
  kv("m", std::to_string(c.clients));
  if (c.experiment == ExperimentKind::counterexample) kv("d", std::to_string(c.dimension));
  kv("s", std::to_string(c.local_steps));
  kv("eta", real(c.eta));
  kv("rounds", std::to_string(c.rounds));
  kv("batch_size", std::to_string(c.batch_size));
  kv("link", std::string(to_string(c.link)));
  switch (c.link) {
    case LinkKind::static_p:
    case LinkKind::uniform: {
      std::string list;
      for (std::size_t i = 0; i < c.link_p.size(); ++i) list += (i ? "," : "") + real(c.link_p[i]);
      kv("link_p", list);
      break;
    }
    case LinkKind::two_group:
      kv("link_p0", real(c.link_p0));
      kv("link_p1", real(c.link_p1));
      break;
    case LinkKind::zipf:
      kv("zipf_a", real(c.zipf_a));
      kv("zipf_n", std::to_string(c.zipf_n));
      kv("link_floor", real(c.link_floor));
      break;
  }
  kv("scale", real(c.scale));
  kv("output", c.output);
  if (c.experiment == ExperimentKind::synthetic) {
    kv("samples_per_client", std::to_string(c.samples_per_client));
    kv("alpha", real(c.alpha));
    kv("beta", real(c.beta));
  } else {
    kv("target_variance", real(c.target_variance));
  }
  if (c.trace_file) kv("trace_file", *c.trace_file);
  kv("metrics_every", std::to_string(c.metrics_every));
  kv("rho_every", std::to_string(c.rho_every));
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize_config(config))));
  return buf;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace fedsim
