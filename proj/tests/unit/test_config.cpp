#include <doctest.h>

#include <string>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/random.hpp"

using namespace fedsim;

namespace {

std::string error_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("minimal counterexample config takes the documented defaults") {
  const auto c = parse_config("experiment = counterexample\nalgorithm = fedavg\nseed = 3\n");
  CHECK(c.experiment == ExperimentKind::counterexample);
  CHECK(c.algorithm == Algorithm::fedavg);
  CHECK(c.local_compute == LocalCompute::all);
  CHECK(c.local_steps == 30);
  CHECK(c.eta == 0.0003);
  CHECK(c.clients == 100);
  CHECK(c.dimension == 100);
  CHECK(c.rounds == 2000);
  CHECK(c.link == LinkKind::two_group);
  CHECK(c.link_p0 == 0.9);
  CHECK(c.link_p1 == 0.1);
  CHECK(c.seed == 3);
  CHECK(c.data_seed == 3);
  CHECK(c.target_variance == 0.01);
}

TEST_CASE("minimal synthetic config") {
  const auto c = parse_config("# fig 3\nexperiment = synthetic\nalgorithm = fedpbc\nseed = 1\n");
  CHECK(c.clients == 150);
  CHECK(c.local_steps == 10);
  CHECK(c.eta == 0.005);
  CHECK(c.rounds == 3000);
  CHECK(c.batch_size == 32);
  CHECK(c.link == LinkKind::zipf);
  CHECK(c.zipf_a == 3.0);
  CHECK(c.zipf_n == 20000);
  CHECK(c.link_floor == 0.1);
  CHECK(c.alpha == 1.0);
  CHECK(c.beta == 1.0);
}

TEST_CASE("errors name the key and line") {
  const auto unknown = error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nlearning_rte = 0.1\n");
  CHECK(contains(unknown, "learning_rte"));
  CHECK(contains(unknown, "line 4"));

  const auto missing = error_of("experiment = counterexample\nalgorithm = fedavg\n");
  CHECK(contains(missing, "seed"));

  const auto range = error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\n\neta = -0.1\n");
  CHECK(contains(range, "eta"));
  CHECK(contains(range, "line 5"));

  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nm = 0\n"), "'m'"));
  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedsgd\nseed = 1\n"), "algorithm"));
  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedavg\nseed = x\n"), "seed"));
  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nseed = 2\n"), "duplicate"));
  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nlink_p1 = 1.5\n"), "link_p1"));
  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nzipf_a = 3\n"), "zipf_a"));
  CHECK(contains(error_of("experiment = synthetic\nalgorithm = fedavg\nseed = 1\nzipf_a = 1\n"), "zipf_a"));
  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nscale = 0.3\n"), "scale"));
  CHECK(contains(error_of("experiment = synthetic\nalgorithm = fedavg\nseed = 1\nd = 4\n"), "'d'"));
  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nm = 3\nlink = static\nlink_p = 0.5,0.5\n"), "link_p"));
  CHECK(contains(error_of("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nnot a pair\n"), "line 4"));
}

TEST_CASE("scale parsing") {
  CHECK(parse_scale("1") == 1.0);
  CHECK(parse_scale("1/2") == 0.5);
  CHECK(parse_scale("0.2") == 0.2);
  CHECK(parse_scale("1/10") == 0.1);
  CHECK_THROWS_AS(parse_scale("1/3"), ConfigError);
  CHECK_THROWS_AS(parse_scale("abc"), ConfigError);
  CHECK(apply_scale(100, 0.1) == 10);
  CHECK(apply_scale(3, 0.1) == 1);
  const auto c = parse_config("experiment = synthetic\nalgorithm = fedavg\nseed = 1\nscale = 1/5\n");
  CHECK(c.scaled_clients() == 30);
  CHECK(c.scaled_rounds() == 600);
  const auto q = parse_config("experiment = counterexample\nalgorithm = fedavg\nseed = 1\nscale = 1/5\n");
  CHECK(q.scaled_clients() == 20);
  CHECK(q.scaled_dimension() == 20);
  CHECK(q.scaled_rounds() == 2000);
}

TEST_CASE("serialization is canonical") {
  const auto c = parse_config("seed=5\nalgorithm=fedpbc\n   experiment = counterexample # trailing\n");
  const std::string text = serialize_config(c);
  const auto again = parse_config(text);
  CHECK(serialize_config(again) == text);
  CHECK(again == c);
  CHECK(config_hash(again) == config_hash(c));
  auto other = c;
  other.seed = 6;
  CHECK(config_hash(other) != config_hash(c));
}

TEST_CASE("parse-serialize-parse fixpoint on random configs") {
  SeededStream root(99);
  for (int trial = 0; trial < 50; ++trial) {
    SeededStream s = root.derive(trial);
    const bool synth = s.bernoulli(0.5);
    std::string text = std::string("experiment = ") + (synth ? "synthetic" : "counterexample") + "\n";
    text += std::string("algorithm = ") + (s.bernoulli(0.5) ? "fedavg" : "fedpbc") + "\n";
    text += "seed = " + std::to_string(s.next_u64()) + "\n";
    const std::size_t m = 1 + s.below(40);
    if (s.bernoulli(0.5)) text += std::string("local_compute = ") + (s.bernoulli(0.5) ? "all" : "active_only") + "\n";
    text += "m = " + std::to_string(m) + "\n";
    if (!synth && s.bernoulli(0.5)) text += "d = " + std::to_string(1 + s.below(50)) + "\n";
    if (s.bernoulli(0.5)) text += "s = " + std::to_string(1 + s.below(40)) + "\n";
    if (s.bernoulli(0.5)) text += "eta = " + format_real(1e-5 + s.uniform()) + "\n";
    if (s.bernoulli(0.5)) text += "rounds = " + std::to_string(1 + s.below(5000)) + "\n";
    if (s.bernoulli(0.3)) text += "data_seed = " + std::to_string(s.below(1000)) + "\n";
    switch (s.below(4)) {
      case 0: {
        text += "link = static\nlink_p = ";
        for (std::size_t i = 0; i < m; ++i) text += (i ? "," : "") + format_real(0.05 + 0.95 * s.uniform());
        text += "\n";
        break;
      }
      case 1: text += "link = uniform\nlink_p = " + format_real(0.05 + 0.95 * s.uniform()) + "\n"; break;
      case 2: text += "link = two_group\nlink_p0 = " + format_real(0.5 + 0.5 * s.uniform()) + "\n"; break;
      default: text += "link = zipf\nzipf_a = " + format_real(1.5 + 2.0 * s.uniform()) + "\nlink_floor = 0.05\n";
    }
    if (synth && s.bernoulli(0.5)) text += "alpha = " + format_real(s.uniform()) + "\n";
    if (!synth && s.bernoulli(0.5)) text += "target_variance = " + format_real(s.uniform()) + "\n";
    if (s.bernoulli(0.3)) text += "trace_file = /tmp/trace" + std::to_string(trial) + ".csv\n";
    CAPTURE(text);
    const auto first = parse_config(text);
    const auto second = parse_config(serialize_config(first));
    const auto third = parse_config(serialize_config(second));
    CHECK(serialize_config(second) == serialize_config(first));
    CHECK(serialize_config(third) == serialize_config(second));
    CHECK(first.eta == second.eta);
    CHECK(first.link_p == second.link_p);
  }
}

TEST_CASE("real lists") {
  CHECK(parse_real_list("0.5, 1,0.25") == Vector{0.5, 1.0, 0.25});
  CHECK_THROWS_AS(parse_real_list("0.5,,1"), ConfigError);
  CHECK_THROWS_AS(parse_real_list("a"), ConfigError);
}

}  // TEST_SUITE
