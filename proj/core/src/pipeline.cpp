#include "cfura/pipeline.hpp"

#include <limits>

#include "cfura/parallel.hpp"

namespace cfura {

Slot simulate_slot(const Scenario& scenario, std::uint64_t run) {
  const std::uint64_t seed = scenario.config.seed;
  Slot slot;
  Rng rc = substream(seed, Stream::codebook, run);
  slot.codebooks = sample_codebooks(scenario.priors, scenario.block_length(), rc);
  Rng rt = substream(seed, Stream::truth, run);
  slot.truth = sample_ground_truth(scenario.priors, scenario.geometry, rt);
  Rng rn = substream(seed, Stream::noise, run);
  slot.signal = synthesize(slot.codebooks, slot.truth, scenario.noise.variance, rn);
  return slot;
}

DenoiserOptions denoiser_options(const ScenarioConfig& cfg) {
  DenoiserOptions o;
  o.mixture = cfg.mixture;
  return o;
}

SeOptions se_options(const Scenario& scenario) {
  SeOptions o;
  o.samples = scenario.config.se_samples;
  o.denoiser = denoiser_options(scenario.config);
  o.seed = scenario.config.seed;
  return o;
}

AmpOptions amp_options(const Scenario& scenario, const SeTrace* se, const GroundTruth* truth) {
  const auto& cfg = scenario.config;
  AmpOptions o;
  o.iterations = cfg.iterations;
  o.onsager = cfg.onsager;
  o.covariance = cfg.covariance;
  o.denoiser = denoiser_options(cfg);
  o.se = se;
  o.truth = truth;
  o.early_stop_tol = cfg.early_stop_tol;
  return o;
}

SeTrace run_scenario_se(const Scenario& scenario) {
  return run_se(scenario.priors, scenario.geometry, scenario.noise.variance, scenario.block_length(),
                scenario.config.iterations, se_options(scenario));
}

std::vector<Calibration> calibrate_thresholds(const Scenario& scenario, const CMatrix& c) {
  const Index U = scenario.num_locations();
  std::vector<Calibration> out(static_cast<std::size_t>(U));
  const double inf = std::numeric_limits<double>::infinity();
  parallel_for(U, [&](Index u) {
    const auto& prior = scenario.priors[static_cast<std::size_t>(u)];
    Calibration& cal = out[static_cast<std::size_t>(u)];
    if (prior.activity <= 0.0) {
      cal = {inf, 0.0, 1.0};
      return;
    }
    if (prior.activity >= 1.0) {
      cal = {-inf, 1.0, 0.0};
      return;
    }
    const Denoiser den(prior, c, denoiser_options(scenario.config));
    Rng rng = substream(scenario.config.seed, Stream::calibration, static_cast<std::uint64_t>(u));
    cal = calibrate_equal_error(den, prior, scenario.geometry, c, scenario.config.calibration_samples, rng);
  });
  return out;
}

}  // namespace cfura
