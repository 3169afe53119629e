#include <benchmark/benchmark.h>

#include "cfura/parallel.hpp"
#include "cfura/pipeline.hpp"

using namespace cfura;

namespace {

const Scenario& desk() {
  static const Scenario s = make_scenario(preset("desk"));
  return s;
}

void BM_AmpDesk(benchmark::State& state) {
  set_num_threads(1);
  const Scenario& sc = desk();
  const Slot slot = simulate_slot(sc, 0);
  AmpOptions o = amp_options(sc, nullptr, nullptr);
  o.iterations = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_amp(slot.signal.y, slot.codebooks, sc.priors, sc.noise.variance, o));
  state.counters["iterations"] = static_cast<double>(o.iterations);
}
BENCHMARK(BM_AmpDesk)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_SimulateSlot(benchmark::State& state) {
  const Scenario& sc = desk();
  std::uint64_t run = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_slot(sc, run++));
}
BENCHMARK(BM_SimulateSlot)->Unit(benchmark::kMillisecond);

void BM_SeStep(benchmark::State& state) {
  set_num_threads(1);
  const Scenario& sc = desk();
  SeOptions o = se_options(sc);
  o.samples = state.range(0);
  const CMatrix c1 = initial_covariance(sc.priors, sc.geometry, sc.noise.variance, sc.block_length());
  for (auto _ : state) {
    benchmark::DoNotOptimize(se_step(c1, sc.priors, sc.geometry, sc.noise.variance, sc.block_length(), o, 1));
  }
}
BENCHMARK(BM_SeStep)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
