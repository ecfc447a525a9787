// OpenMP kernels against their serial references.
//   bench_parallel --benchmark_filter=Strip
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "qgraph/generators.hpp"
#include "qgraph/propagator.hpp"

using namespace qgraph;

namespace {

MetricTree bench_tree() { return caterpillar({1.0, 0.7, 1.5}, {1.0, 0.8}, {1, 0, 1}); }

StripGrid bench_grid() {
  StripGrid g;
  g.n_tau = 400;
  g.n_re = 3;
  return g;
}

EvolutionRequest bench_request() {
  EvolutionRequest req;
  req.tree = bench_tree();
  req.u0 = StateFunction{GraphFunction({{0, {Packet{1.0, 7.0, 1.0, -1.5}}}}), {}};
  req.times = {0.5, 1.0, 2.0};
  for (std::size_t e = 0; e < req.tree.edge_count(); ++e) {
    const double len = req.tree.edge(e).infinite() ? 20.0 : req.tree.edge(e).length;
    for (int j = 0; j < 100; ++j) req.samples.push_back(SamplePoint{e, len * j / 99.0});
  }
  return req;
}

void BM_StripScanParallel(benchmark::State& st) {
  const MetricTree t = bench_tree();
  const StripGrid g = bench_grid();
  for (auto _ : st) benchmark::DoNotOptimize(strip_scan(t, g));
}

void BM_StripScanSerial(benchmark::State& st) {
  const MetricTree t = bench_tree();
  const StripGrid g = bench_grid();
  for (auto _ : st) benchmark::DoNotOptimize(strip_scan_serial(t, g));
}

void BM_EvolveParallel(benchmark::State& st) {
  const EvolutionRequest req = bench_request();
  for (auto _ : st) benchmark::DoNotOptimize(evolve_dispersive(req));
}

void BM_EvolveSerial(benchmark::State& st) {
  const EvolutionRequest req = bench_request();
  for (auto _ : st) benchmark::DoNotOptimize(evolve_dispersive_serial(req));
}

} // namespace

BENCHMARK(BM_StripScanParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StripScanSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvolveParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvolveSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
