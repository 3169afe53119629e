#include <benchmark/benchmark.h>

#include "cfura/pipeline.hpp"

using namespace cfura;

namespace {

struct DenoiserFixture {
  Scenario scenario;
  Denoiser denoiser;
  CMatrix rows;

  explicit DenoiserFixture(int grid_order)
      : scenario(make(grid_order)), denoiser(scenario.priors[0], initial_covariance(scenario.priors, scenario.geometry,
                                                                                     scenario.noise.variance,
                                                                                     scenario.block_length())) {
    const Slot slot = simulate_slot(scenario, 0);
    rows = slot.codebooks[0].adjoint() * slot.signal.y;
  }

  static Scenario make(int grid_order) {
    ScenarioConfig c = preset("desk");
    c.grid_order = grid_order;
    return make_scenario(c);
  }
};

const DenoiserFixture& fixture(int k) {
  static const DenoiserFixture k4(4);
  static const DenoiserFixture k8(8);
  return k == 8 ? k8 : k4;
}

void BM_DenoiserBatch(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const bool jac = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(f.denoiser.apply(f.rows, jac));
  state.SetItemsProcessed(state.iterations() * f.rows.rows());
}
BENCHMARK(BM_DenoiserBatch)->Args({4, 0})->Args({4, 1})->Args({8, 1})->Unit(benchmark::kMillisecond);

void BM_DenoiserRowPosteriorMean(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const CRow r = f.rows.row(0);
  for (auto _ : state) benchmark::DoNotOptimize(f.denoiser.posterior_mean(r));
}
BENCHMARK(BM_DenoiserRowPosteriorMean)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_DenoiserRowJacobian(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const CRow r = f.rows.row(0);
  for (auto _ : state) benchmark::DoNotOptimize(f.denoiser.jacobian(r));
}
BENCHMARK(BM_DenoiserRowJacobian)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_DenoiserConstruct(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const CMatrix c = initial_covariance(f.scenario.priors, f.scenario.geometry, f.scenario.noise.variance,
                                       f.scenario.block_length());
  for (auto _ : state) benchmark::DoNotOptimize(Denoiser(f.scenario.priors[0], c));
}
BENCHMARK(BM_DenoiserConstruct)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

}  // namespace
