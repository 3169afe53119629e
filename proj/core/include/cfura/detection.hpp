#pragma once

#include <optional>
#include <vector>

#include "cfura/denoiser.hpp"

namespace cfura {

/// Declared set and its partition against the truth for one location.
struct DetectionOutcome {
  std::vector<Index> declared;
  std::vector<Index> detected;     // declared and active
  std::vector<Index> false_alarm;  // declared, not active
  std::vector<Index> missed;       // active, not declared
  Index codewords = 0;

  Index actives() const { return static_cast<Index>(detected.size() + missed.size()); }
  Index inactives() const { return codewords - actives(); }
};

/// Declares n active iff scores(n) >= log_tau. `active` must be sorted.
DetectionOutcome classify(const RVector& scores, double log_tau, const std::vector<Index>& active);

/// Scores of one location with their ground-truth active set.
struct LabeledScores {
  RVector scores;
  std::vector<Index> active;  // sorted
  double log_tau = 0.0;       // calibrated threshold, used by operating_point
};

struct RocPoint {
  double log_tau = 0.0;
  Index false_alarms = 0;
  Index missed = 0;
  Index actives = 0;
  Index inactives = 0;

  std::optional<double> p_fa() const;
  std::optional<double> p_md() const;
};

/// Count-aggregated ROC over all locations, one point per threshold (sorted ascending).
std::vector<RocPoint> build_roc(const std::vector<LabeledScores>& data, std::vector<double> log_taus);

/// Count-aggregated confusion at each location's own threshold.
RocPoint operating_point(const std::vector<LabeledScores>& data);

/// Threshold log_tau at which the fraction of inactive scores >= tau equals the fraction of active
/// scores < tau, found by bisection up to 1e-3 or sample resolution.
double equal_error_threshold(const std::vector<double>& inactive, const std::vector<double>& active);

struct Calibration {
  double log_tau = 0.0;
  double p_fa = 0.0;
  double p_md = 0.0;
};

/// Decoder-side calibration on the decoupled model r = a h + phi, phi ~ CN(0, C), with `samples`
/// draws per hypothesis. Throws ConfigError for activity 0 or 1.
Calibration calibrate_equal_error(const Denoiser& denoiser, const LocationPrior& prior, const NetworkGeometry& g,
                                  const CMatrix& c, Index samples, Rng& rng);

}  // namespace cfura
