#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfura/genie_mmse.hpp"
#include "cfura/manifest.hpp"
#include "cfura/pipeline.hpp"
#include "cfura/positioning.hpp"

namespace cfura {

struct ExperimentContext {
  /// CSV, JSON and manifest files go here; empty means compute only.
  std::filesystem::path out_dir;
  /// Zeroes timing fields so repeated runs produce identical files.
  bool deterministic = false;
  std::function<void(const std::string&)> log;
};

/// Decoder variant of an experiment: codebook partition and grid.
struct Variant {
  CodebookMode mode = CodebookMode::location_based;
  DenoiserMode denoiser = DenoiserMode::matched;

  std::string scenario_name() const { return mode == CodebookMode::location_based ? "lb" : "sc"; }
  std::string denoiser_name() const { return std::string(to_string(denoiser)); }
  std::string label() const { return scenario_name() + "_" + denoiser_name(); }
};

inline const Variant kLbMatched{CodebookMode::location_based, DenoiserMode::matched};
inline const Variant kLbMismatched{CodebookMode::location_based, DenoiserMode::mismatched};
inline const Variant kScMatched{CodebookMode::single_codebook, DenoiserMode::matched};

ScenarioConfig variant_config(const ScenarioConfig& base, const Variant& v);

// ---- SE vs simulation ------------------------------------------------------------------------

struct SeCurve {
  Variant variant;
  std::vector<double> sim_mean;    // empirical normalized MSE of X^(t), t = 1..T+1
  std::vector<double> sim_stderr;
  /// sum of error energies over sum of truth energies across runs; same limit as the SE ratio
  std::vector<double> sim_pooled;
  std::vector<double> se_mse;      // SE prediction, same indexing
  std::vector<int> sim_count;      // runs contributing at each t
  /// ||cov(R^(T) - X) - C_SE^(T)||_F / ||C_SE^(T)||_F over pooled rows of all runs.
  double decoupling_error = 0.0;
  /// Same distance for the decoder-side pooled estimate of C^(T) from S^H Z.
  double empirical_c_error = 0.0;
  int runs = 0;
};

struct SeComparison {
  std::string manifest_hash;
  std::vector<SeCurve> curves;
};

SeComparison run_se_comparison(const ScenarioConfig& cfg, const ExperimentContext& ctx,
                               const std::vector<Variant>& variants = {kLbMatched, kLbMismatched, kScMatched});

// ---- Detection ---------------------------------------------------------------------------------

struct RocResult {
  Variant variant;
  std::vector<RocPoint> curve;
  RocPoint operating;  // at the calibrated per-location thresholds
  int runs = 0;

  double p_fa() const { return operating.p_fa().value_or(0.0); }
  double p_md() const { return operating.p_md().value_or(0.0); }
  /// (P_FA + P_MD) / 2 at the calibrated point and its binomial standard deviation.
  double equal_error() const { return 0.5 * (p_fa() + p_md()); }
  double equal_error_sigma() const;
};

struct RocComparison {
  std::string manifest_hash;
  std::vector<RocResult> results;
};

RocComparison run_roc(const ScenarioConfig& cfg, const ExperimentContext& ctx,
                      const std::vector<Variant>& variants = {kLbMatched, kLbMismatched, kScMatched});

// ---- Positioning -------------------------------------------------------------------------------

struct PositionCdfResult {
  Variant variant;
  std::vector<PositionEstimate> estimates;  // detected messages only
  CdfTable table;
  double ks = 0.0;  // sup-distance between the MAP and oracle error distributions
  double median_error = 0.0;
  double median_oracle_error = 0.0;
  int runs = 0;
};

struct PositionCdfComparison {
  std::string manifest_hash;
  std::vector<PositionCdfResult> results;
};

PositionCdfComparison run_position_cdf(const ScenarioConfig& cfg, const ExperimentContext& ctx,
                                       const std::vector<Variant>& variants = {kLbMatched, kScMatched});

struct PositionSnapshot {
  std::string manifest_hash;
  Index location = 0;
  Index codeword = 0;
  int run = 0;
  PositionGrid grid;
  RVector objective;
  Point2D truth;
  Point2D estimate;
  Index map_index = 0;
  std::array<Point2D, 3> tile_vertices;
};

/// First detected message at cfg.snapshot_location (searching runs in order, then other locations).
PositionSnapshot run_position_snapshot(const ScenarioConfig& cfg, const ExperimentContext& ctx);

// ---- Channel estimation ------------------------------------------------------------------------

struct ChannelMsePoint {
  double snr_rx_db = 0.0;
  std::string estimator;  // genie, amp_matched, amp_mismatched, se_prediction
  std::optional<double> mse;
  Index messages = 0;
  Index locations = 0;
  int runs = 0;
};

struct GenieCheck {
  double snr_rx_db = 0.0;
  GenieMonteCarlo mc;
};

struct ChannelMseSweep {
  std::string manifest_hash;
  std::vector<ChannelMsePoint> points;
  std::vector<GenieCheck> genie_checks;

  std::optional<double> find(double snr_rx_db, const std::string& estimator) const;
};

ChannelMseSweep run_channel_mse_sweep(const ScenarioConfig& cfg, const ExperimentContext& ctx);

}  // namespace cfura
