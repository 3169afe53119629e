#pragma once

#include <cstdint>
#include <vector>

#include "cfura/airlink.hpp"
#include "cfura/amp.hpp"
#include "cfura/detection.hpp"

namespace cfura {

/// One simulated RACH slot.
struct Slot {
  std::vector<CMatrix> codebooks;
  GroundTruth truth;
  ReceivedSignal signal;
};

/// Codebooks, truth and noise of run `run` from their own substreams of the master seed.
Slot simulate_slot(const Scenario& scenario, std::uint64_t run);

SeOptions se_options(const Scenario& scenario);
AmpOptions amp_options(const Scenario& scenario, const SeTrace* se, const GroundTruth* truth);
DenoiserOptions denoiser_options(const ScenarioConfig& cfg);

SeTrace run_scenario_se(const Scenario& scenario);

/// Decoder-side equal-error thresholds per location under C = `c`. Activity 0 gets +inf (declare
/// nothing) and activity 1 gets -inf (declare everything).
std::vector<Calibration> calibrate_thresholds(const Scenario& scenario, const CMatrix& c);

}  // namespace cfura
