#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfura/geometry.hpp"

namespace cfura {

enum class OnsagerMode { empirical, se };
enum class CovarianceSource { se, empirical };
enum class CodebookMode { location_based, single_codebook };
enum class DenoiserMode { matched, mismatched };
enum class MixtureWeights { posterior, prior };

std::string_view to_string(OnsagerMode m);
std::string_view to_string(CovarianceSource m);
std::string_view to_string(CodebookMode m);
std::string_view to_string(DenoiserMode m);
std::string_view to_string(MixtureWeights m);

struct ScenarioConfig {
  NetworkParams network;
  int block_length = 256;
  int codewords_per_location = 512;
  std::vector<double> activity_raster{0.009, 0.005, 0.0005, 0.0002};
  double snr_rx_db = 10.0;
  int grid_order = 4;
  int iterations = 8;
  OnsagerMode onsager = OnsagerMode::empirical;
  CovarianceSource covariance = CovarianceSource::empirical;
  std::uint64_t seed = 20240601;
  CodebookMode mode = CodebookMode::location_based;
  DenoiserMode denoiser = DenoiserMode::matched;
  MixtureWeights mixture = MixtureWeights::posterior;
  int se_samples = 20000;
  int calibration_samples = 20000;
  int runs = 20;
  /// SC grid has ~sc_thinning times fewer points per tile than the LB grid.
  int sc_thinning = 4;
  /// SC activity; when absent it preserves the LB expected active count.
  std::optional<double> sc_activity;
  std::vector<double> snr_sweep_db{0.0, 5.0, 10.0};
  /// Decoder-side early stop on relative iterate change; 0 disables.
  double early_stop_tol = 0.0;
  int snapshot_location = 0;
  int genie_mc_draws = 1000;
};

/// Throws ConfigError naming the offending field.
void validate(const ScenarioConfig& cfg);

/// "desk" (CI scale) or "paper" (full scale).
ScenarioConfig preset(std::string_view name);

/// Activity probability, codebook size, decoder position grid Sigma(q) diagonals and user support.
struct LocationPrior {
  double activity = 0.0;
  Index codewords = 0;
  PositionGrid grid;
  std::vector<RVector> profiles;
  /// Tiles where users of this codebook are located, with probabilities.
  std::vector<Index> support_tiles;
  std::vector<double> support_weights;

  Index grid_size() const { return grid.size(); }
  double load(Index block_length) const { return static_cast<double>(codewords) / static_cast<double>(block_length); }
};

struct NoiseModel {
  double snr = 1.0;
  double variance = 1.0;
};

double db_to_linear(double db);
/// SNR_rx * (1 + (varsigma / d0)^rho) with varsigma the centroid-to-nearest-RU distance.
double compute_transmit_snr(const NetworkGeometry& g, double snr_rx_db);
/// sigma_w^2 = 1 / (L * snr).
double noise_variance(int block_length, double snr);
NoiseModel make_noise_model(const NetworkGeometry& g, int block_length, double snr_rx_db);

LocationPrior make_prior(const NetworkGeometry& g, double activity, Index codewords, PositionGrid grid,
                         std::vector<Index> support_tiles, std::vector<double> support_weights);

/// One prior per tile in raster order; mismatched mode uses the tile centroid only.
std::vector<LocationPrior> build_priors(const NetworkGeometry& g, const ScenarioConfig& cfg);

/// Single location spanning the torus with N = sum N_u codewords.
LocationPrior single_codebook_prior(const NetworkGeometry& g, const ScenarioConfig& cfg, int thinning);

int thinned_order(int k, int thinning);

struct Scenario {
  ScenarioConfig config;
  NetworkGeometry geometry;
  std::vector<LocationPrior> priors;
  NoiseModel noise;

  Index num_locations() const { return static_cast<Index>(priors.size()); }
  Index num_antennas() const { return geometry.num_antennas(); }
  Index block_length() const { return config.block_length; }
  double expected_actives() const;
};

Scenario make_scenario(const ScenarioConfig& cfg);

}  // namespace cfura
