#include <benchmark/benchmark.h>

#include "fedsim/algorithms.hpp"
#include "fedsim/link_model.hpp"
#include "fedsim/mixing.hpp"
#include "fedsim/objectives.hpp"
#include "fedsim/oracles.hpp"

using namespace fedsim;

namespace {

Vector bench_p(std::size_t m) {
  SeededStream root(1);
  SeededStream s = root.derive("p");
  Vector p(m);
  for (double& v : p) v = 0.1 + 0.9 * s.uniform();
  return p;
}

void BM_ExpectedSquareExact(benchmark::State& state) {
  const Vector p = bench_p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(expected_square_exact(p));
}
BENCHMARK(BM_ExpectedSquareExact)->Arg(10)->Arg(30)->Arg(100)->Arg(150);

void BM_Rho(benchmark::State& state) {
  const auto m = expected_square_exact(bench_p(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(rho(m));
}
BENCHMARK(BM_Rho)->Arg(10)->Arg(30)->Arg(100)->Arg(150);

void BM_LimitIntegral(benchmark::State& state) {
  const Vector p = bench_p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fedavg_limit_integral(p));
}
BENCHMARK(BM_LimitIntegral)->Arg(12)->Arg(100)->Arg(1000)->Arg(10000);

void BM_LimitSubset(benchmark::State& state) {
  const Vector p = bench_p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fedavg_limit_subset(p));
}
BENCHMARK(BM_LimitSubset)->Arg(8)->Arg(12)->Arg(20);

void BM_ZipfCountProbabilities(benchmark::State& state) {
  const auto proc = LinkProbabilityProcess::zipf_count(3.0, 20000, 0.1, 150);
  SeededStream root(2);
  std::uint64_t t = 0;
  for (auto _ : state) {
    SeededStream s = root.derive(t++);
    benchmark::DoNotOptimize(proc.probabilities_at(0, s));
  }
}
BENCHMARK(BM_ZipfCountProbabilities);

void BM_FedpbcRoundQuadratic(benchmark::State& state) {
  const std::size_t m = 100, d = 100;
  SeededStream root(3);
  SeededStream ts = root.derive("targets");
  QuadraticObjective q(counterexample_targets(d, m, 0.01, ts));
  AlgorithmConfig cfg;
  cfg.variant = Algorithm::fedpbc;
  cfg.local_steps = 30;
  cfg.eta = 0.0003;
  FleetState st = FleetState::initial(Vector(d, 0.0), m);
  SeededStream links = root.derive("links");
  const Vector p(m, 0.5);
  std::size_t t = 0;
  for (auto _ : state) {
    const ActiveSet a = sample_active_set(p, t++, links);
    st = fedpbc_round(st, a, cfg, q).state;
  }
}
BENCHMARK(BM_FedpbcRoundQuadratic);

void BM_SoftmaxBatchGradient(benchmark::State& state) {
  SeededStream root(4);
  SeededStream ds = root.derive("data");
  const auto data = generate_synthetic(1.0, 1.0, 1, ds);
  const std::span<const Sample> batch(data.clients[0].train.data(), 32);
  const Vector params(kSoftmaxDimension, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_loss_grad(params, batch));
}
BENCHMARK(BM_SoftmaxBatchGradient);

}  // namespace

BENCHMARK_MAIN();
