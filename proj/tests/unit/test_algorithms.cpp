#include <doctest.h>

#include <cmath>

#include "fedsim/algorithms.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/oracles.hpp"
#include "support/test_oracles.hpp"

using namespace fedsim;

namespace {

QuadraticObjective line_objective(std::initializer_list<double> targets) {
  DenseMatrix t(1, targets.size());
  std::size_t i = 0;
  for (double v : targets) t(0, i++) = v;
  return QuadraticObjective(t);
}

AlgorithmConfig config(Algorithm a, std::size_t s, double eta,
                       LocalCompute c = LocalCompute::all) {
  AlgorithmConfig cfg;
  cfg.variant = a;
  cfg.local_steps = s;
  cfg.eta = eta;
  cfg.local_compute = c;
  return cfg;
}

// Objective whose gradient overflows to infinity.
class Exploding final : public Objective {
 public:
  std::size_t dimension() const override { return 1; }
  std::size_t clients() const override { return 2; }
  std::size_t train_size(std::size_t) const override { return 0; }
  void gradient(std::size_t, std::span<const double> x, std::span<const std::size_t>,
                std::span<double> out) const override {
    out[0] = -1e200 * (1.0 + std::abs(x[0]));
  }
  Vector global_gradient(std::span<const double> x) const override { return {-(1.0 + x[0])}; }
  double train_loss(std::span<const double>) const override { return 0.0; }
  std::optional<double> test_accuracy(std::span<const double>) const override {
    return std::nullopt;
  }
};

}  // namespace

TEST_SUITE("algorithms") {

TEST_CASE("local sgd examples") {
  const auto q = line_objective({2.0});
  CHECK(local_sgd(Vector{0.0}, 0, 1, 0.5, q, {}) == Vector{1.0});
  CHECK(local_sgd(Vector{0.0}, 0, 2, 0.5, q, {}) == Vector{1.5});
  CHECK(local_sgd(Vector{0.3}, 0, 5, 0.0, q, {}) == Vector{0.3});
  Vector gsum;
  (void)local_sgd(Vector{0.0}, 0, 2, 0.5, q, {}, 0, &gsum);
  CHECK(gsum[0] == doctest::Approx(-3.0));
}

TEST_CASE("local sgd matches the closed-form quadratic trajectory") {
  SeededStream root(1);
  SeededStream s = root.derive("x");
  DenseMatrix t(4, 1);
  for (double& v : t.entries()) v = s.normal();
  QuadraticObjective q(t);
  Vector x0(4);
  for (double& v : x0) v = s.normal();
  for (std::size_t k : {1u, 3u, 17u}) {
    const Vector got = local_sgd(x0, 0, k, 0.1, q, {});
    const Vector ref = oracle::quadratic_steps(x0, t.column(0), 0.1, k);
    for (std::size_t j = 0; j < 4; ++j) CHECK(got[j] == doctest::Approx(ref[j]).epsilon(1e-13));
  }
}

TEST_CASE("divergence is reported with round and client") {
  Exploding obj;
  try {
    (void)local_sgd(Vector{1.0}, 1, 30, 1e200, obj, {}, 7);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.round() == 7);
    CHECK(e.client() == 1);
  }
}

TEST_CASE("fedavg round examples") {
  const auto q = line_objective({0.0, 2.0});
  const auto cfg = config(Algorithm::fedavg, 1, 0.5);
  const auto s0 = FleetState::initial(Vector{0.0}, 2);
  const auto full = fedavg_round(s0, ActiveSet{0, {0, 1}}, cfg, q);
  CHECK(full.state.global == Vector{0.5});
  CHECK(full.state.round == 1);

  const auto none = fedavg_round(s0, ActiveSet{0, {}}, cfg, q);
  CHECK(none.state.global == Vector{0.0});
  CHECK(none.state.clients(0, 1) == 1.0);  // advanced locally

  const auto idle = fedavg_round(s0, ActiveSet{0, {}}, config(Algorithm::fedavg, 1, 0.5, LocalCompute::active_only), q);
  CHECK(idle.state.clients == s0.clients);
  CHECK_THROWS_AS(fedavg_round(s0, ActiveSet{0, {}}, config(Algorithm::fedpbc, 1, 0.5), q),
                  ContractViolation);
}

TEST_CASE("fedpbc round examples") {
  const auto q = line_objective({0.0, 2.0});
  const auto cfg = config(Algorithm::fedpbc, 1, 0.5);
  const auto s0 = FleetState::initial(Vector{0.0}, 2);
  const auto pbc = fedpbc_round(s0, ActiveSet{0, {0, 1}}, cfg, q);
  const auto avg = fedavg_round(s0, ActiveSet{0, {0, 1}}, config(Algorithm::fedavg, 1, 0.5), q);
  CHECK(pbc.state.global == avg.state.global);

  // Only client 1 reports: it becomes the global model and receives it back;
  // client 0 keeps its local result.
  FleetState st = s0;
  st.clients(0, 0) = 4.0;
  const auto one = fedpbc_round(st, ActiveSet{0, {1}}, cfg, q);
  CHECK(one.state.global == Vector{1.0});
  CHECK(one.state.clients(0, 1) == 1.0);
  CHECK(one.state.clients(0, 0) == 2.0);

  const auto none = fedpbc_round(st, ActiveSet{0, {}}, cfg, q);
  CHECK(none.state.global == st.global);
  CHECK(none.state.clients(0, 0) == 2.0);
  CHECK(none.state.clients(0, 1) == 1.0);
}

TEST_CASE("matrix form identity") {
  SeededStream root(3);
  SeededStream ts = root.derive("targets");
  DenseMatrix t(3, 5);
  for (double& v : t.entries()) v = ts.normal();
  QuadraticObjective q(t);
  const auto cfg = config(Algorithm::fedpbc, 4, 0.05);
  FleetState st = FleetState::initial(Vector(3, 0.0), 5);
  SeededStream as = root.derive("active");
  for (std::size_t r = 0; r < 100; ++r) {
    ActiveSet a{r, {}};
    if (r == 0) a.members = {0, 1, 2, 3, 4};
    else if (r > 1)
      for (std::size_t i = 0; i < 5; ++i)
        if (as.bernoulli(0.4)) a.members.push_back(i);
    const auto out = fedpbc_round(st, a, cfg, q);
    const auto rep = matrix_form_check(st, a, cfg, q, out.state, out.batches);
    CHECK(rep.pass);
    CHECK(rep.max_deviation <= 1e-10);
    st = out.state;
  }
  CHECK_THROWS_AS(matrix_form_check(st, ActiveSet{}, config(Algorithm::fedavg, 1, 0.1), q, st),
                  ContractViolation);
}

TEST_CASE("full participation: both engines coincide") {
  SeededStream root(4);
  SeededStream ts = root.derive("targets");
  DenseMatrix t(2, 4);
  for (double& v : t.entries()) v = ts.normal();
  QuadraticObjective q(t);
  FleetState a = FleetState::initial(Vector(2, 0.0), 4), b = a;
  const ActiveSet all{0, {0, 1, 2, 3}};
  for (int r = 0; r < 20; ++r) {
    a = fedavg_round(a, all, config(Algorithm::fedavg, 3, 0.1), q).state;
    b = fedpbc_round(b, all, config(Algorithm::fedpbc, 3, 0.1), q).state;
    CHECK(a.global == b.global);
  }
}

TEST_CASE("uniform participation converges to the optimum") {
  const auto q = line_objective({0.0, 1.0, 5.0, 10.0});
  const Vector p(4, 0.5);
  for (Algorithm alg : {Algorithm::fedavg, Algorithm::fedpbc}) {
    SeededStream root(5);
    SeededStream links = root.derive("links");
    const auto cfg = config(alg, 2, 0.05);
    FleetState st = FleetState::initial(Vector{0.0}, 4);
    double avg = 0.0;
    const std::size_t burn = 500, rounds = 20000;
    for (std::size_t r = 0; r < rounds; ++r) {
      st = run_round(st, sample_active_set(p, r, links), cfg, q).state;
      if (r >= burn) avg += evaluation_model(st, alg)[0] / double(rounds - burn);
    }
    CAPTURE(to_string(alg));
    CHECK(std::abs(avg - 4.0) < 0.1);
  }
}

TEST_CASE("run_experiment records pre-round metrics and partial rows on divergence") {
  const auto q = line_objective({0.0, 2.0});
  auto proc = LinkProbabilityProcess::constant(Vector{1.0, 1.0});
  SeededStream s(6);
  const auto res = run_experiment(config(Algorithm::fedpbc, 1, 0.5), q, proc, 3, Vector{0.0}, s);
  REQUIRE(res.rows.size() == 3);
  CHECK(res.rows[0].round == 0);
  CHECK(res.rows[0].grad_norm == doctest::Approx(1.0));
  CHECK(res.rows[0].active_count == 2);
  CHECK(res.rows[1].grad_norm == doctest::Approx(0.5));
  CHECK(res.final_state.round == 3);

  Exploding boom;
  SeededStream s2(7);
  RunOptions opts;
  try {
    (void)run_experiment(config(Algorithm::fedavg, 30, 1e200), boom, proc, 5, Vector{1.0}, s2, opts);
    FAIL("expected DivergedRun");
  } catch (const DivergedRun& e) {
    CHECK(e.round() == 0);
    CHECK(e.rows().size() == 1);
  }
}

TEST_CASE("metrics stride keeps the last row") {
  const auto q = line_objective({0.0, 2.0});
  auto proc = LinkProbabilityProcess::uniform(0.5, 2);
  SeededStream s(8);
  RunOptions opts;
  opts.metrics_every = 4;
  const auto res = run_experiment(config(Algorithm::fedpbc, 1, 0.1), q, proc, 10, Vector{0.0}, s, opts);
  REQUIRE(res.rows.size() == 4);
  CHECK(res.rows[1].round == 4);
  CHECK(res.rows.back().round == 9);
}

TEST_CASE("consensus error") {
  DenseMatrix x(1, 2);
  x(0, 0) = 0.0;
  x(0, 1) = 2.0;
  CHECK(consensus_error(x) == doctest::Approx(1.0));
  DenseMatrix same(2, 3);
  for (std::size_t i = 0; i < 3; ++i) same.set_column(i, Vector{0.1, 0.7});
  CHECK(consensus_error(same) == 0.0);
}

TEST_CASE("config validation") {
  auto cfg = config(Algorithm::fedavg, 0, 0.1);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = config(Algorithm::fedavg, 1, 0.0);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = config(Algorithm::fedavg, 3, 0.2);
  cfg.step_schedule = [](std::size_t r) { return 1.0 / double(r + 1); };
  CHECK(cfg.step_size(3) == 0.25);
}

}  // TEST_SUITE
