#include "cfura/scenario.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace cfura {

std::string_view to_string(OnsagerMode m) { return m == OnsagerMode::empirical ? "empirical" : "se"; }
std::string_view to_string(CovarianceSource m) { return m == CovarianceSource::se ? "se" : "empirical"; }
std::string_view to_string(CodebookMode m) {
  return m == CodebookMode::location_based ? "location_based" : "single_codebook";
}
std::string_view to_string(DenoiserMode m) { return m == DenoiserMode::matched ? "matched" : "mismatched"; }
std::string_view to_string(MixtureWeights m) { return m == MixtureWeights::posterior ? "posterior" : "prior"; }

void validate(const ScenarioConfig& cfg) {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(std::string(field) + ": " + what);
  };
  require(cfg.network.side_km > 0.0 && std::isfinite(cfg.network.side_km), "side_km", "must be positive");
  require(cfg.network.n1 >= 1 && cfg.network.n2 >= 1, "n1/n2", "must be >= 1");
  require(cfg.network.antennas_per_ru >= 1, "antennas_per_ru", "must be >= 1");
  require(cfg.network.cutoff_km > 0.0, "cutoff_km", "must be positive");
  require(cfg.network.pathloss_exponent >= 0.0, "pathloss_exponent", "must be >= 0");
  require(cfg.block_length >= 1, "block_length", "must be >= 1");
  require(cfg.codewords_per_location >= 1, "codewords_per_location", "must be >= 1");
  require(!cfg.activity_raster.empty(), "activity_raster", "must be non-empty");
  for (double l : cfg.activity_raster) require(l >= 0.0 && l <= 1.0, "activity_raster", "entries must lie in [0,1]");
  require(std::isfinite(cfg.snr_rx_db), "snr_rx_db", "must be finite");
  require(cfg.grid_order >= 1, "grid_order", "must be >= 1");
  require(cfg.iterations >= 1, "iterations", "must be >= 1");
  require(cfg.se_samples >= 2, "se_samples", "must be >= 2");
  require(cfg.calibration_samples >= 2, "calibration_samples", "must be >= 2");
  require(cfg.runs >= 1, "runs", "must be >= 1");
  require(cfg.sc_thinning >= 1, "sc_thinning", "must be >= 1");
  if (cfg.sc_activity) require(*cfg.sc_activity >= 0.0 && *cfg.sc_activity <= 1.0, "sc_activity", "must lie in [0,1]");
  for (double s : cfg.snr_sweep_db) require(std::isfinite(s), "snr_sweep_db", "entries must be finite");
  require(cfg.early_stop_tol >= 0.0, "early_stop_tol", "must be >= 0");
  require(cfg.snapshot_location >= 0 && cfg.snapshot_location < 2 * cfg.network.n1 * cfg.network.n2,
          "snapshot_location", "must index a tile");
  require(cfg.genie_mc_draws >= 2, "genie_mc_draws", "must be >= 2");
}

ScenarioConfig preset(std::string_view name) {
  ScenarioConfig cfg;
  if (name == "desk") {
    cfg.block_length = 256;
    cfg.codewords_per_location = 512;
    cfg.grid_order = 4;
    cfg.iterations = 8;
    cfg.runs = 20;
    return cfg;
  }
  if (name == "paper") {
    cfg.block_length = 1024;
    cfg.codewords_per_location = 2048;
    cfg.grid_order = 8;
    cfg.iterations = 10;
    cfg.runs = 100;
    return cfg;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double compute_transmit_snr(const NetworkGeometry& g, double snr_rx_db) {
  const double varsigma = g.nearest_ru_distance(g.tile(0).centroid);
  const auto& p = g.params();
  return db_to_linear(snr_rx_db) * (1.0 + std::pow(varsigma / p.cutoff_km, p.pathloss_exponent));
}

double noise_variance(int block_length, double snr) {
  if (block_length < 1) throw ConfigError("block length must be >= 1");
  if (!(snr > 0.0)) throw ConfigError("snr must be positive");
  return 1.0 / (static_cast<double>(block_length) * snr);
}

NoiseModel make_noise_model(const NetworkGeometry& g, int block_length, double snr_rx_db) {
  NoiseModel n;
  n.snr = compute_transmit_snr(g, snr_rx_db);
  n.variance = noise_variance(block_length, n.snr);
  return n;
}

LocationPrior make_prior(const NetworkGeometry& g, double activity, Index codewords, PositionGrid grid,
                         std::vector<Index> support_tiles, std::vector<double> support_weights) {
  LocationPrior p;
  p.activity = activity;
  p.codewords = codewords;
  p.profiles.reserve(grid.points.size());
  for (const auto& q : grid.points) p.profiles.push_back(g.covariance_profile(q));
  p.grid = std::move(grid);
  p.support_tiles = std::move(support_tiles);
  p.support_weights = std::move(support_weights);
  return p;
}

std::vector<LocationPrior> build_priors(const NetworkGeometry& g, const ScenarioConfig& cfg) {
  if (cfg.activity_raster.empty()) throw ConfigError("activity_raster: must be non-empty");
  const int k = cfg.denoiser == DenoiserMode::matched ? cfg.grid_order : 1;
  std::vector<LocationPrior> priors;
  priors.reserve(static_cast<std::size_t>(g.num_tiles()));
  for (Index u = 0; u < g.num_tiles(); ++u) {
    const double lambda = cfg.activity_raster[static_cast<std::size_t>(u) % cfg.activity_raster.size()];
    priors.push_back(make_prior(g, lambda, cfg.codewords_per_location, g.position_grid(u, k), {u}, {1.0}));
  }
  return priors;
}

int thinned_order(int k, int thinning) {
  const double reduced = static_cast<double>(k) / std::sqrt(static_cast<double>(thinning));
  return std::max(1, static_cast<int>(std::lround(reduced)));
}

LocationPrior single_codebook_prior(const NetworkGeometry& g, const ScenarioConfig& cfg, int thinning) {
  const Index U = g.num_tiles();
  const int k = cfg.denoiser == DenoiserMode::matched ? thinned_order(cfg.grid_order, thinning) : 1;

  std::vector<double> tile_mass(static_cast<std::size_t>(U));
  for (Index u = 0; u < U; ++u) {
    tile_mass[static_cast<std::size_t>(u)] =
        cfg.activity_raster[static_cast<std::size_t>(u) % cfg.activity_raster.size()] * cfg.codewords_per_location;
  }
  const double total_mass = std::accumulate(tile_mass.begin(), tile_mass.end(), 0.0);
  const Index n_total = U * cfg.codewords_per_location;

  PositionGrid grid;
  for (Index u = 0; u < U; ++u) {
    const PositionGrid t = g.position_grid(u, k);
    grid.points.insert(grid.points.end(), t.points.begin(), t.points.end());
  }
  grid.weights.assign(grid.points.size(), 1.0 / static_cast<double>(grid.points.size()));

  std::vector<Index> tiles(static_cast<std::size_t>(U));
  std::iota(tiles.begin(), tiles.end(), Index{0});
  std::vector<double> weights(static_cast<std::size_t>(U), 1.0 / static_cast<double>(U));
  if (total_mass > 0.0) {
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = tile_mass[i] / total_mass;
  }
  const double lambda = cfg.sc_activity ? *cfg.sc_activity : total_mass / static_cast<double>(n_total);
  return make_prior(g, lambda, n_total, std::move(grid), std::move(tiles), std::move(weights));
}

double Scenario::expected_actives() const {
  double s = 0.0;
  for (const auto& p : priors) s += p.activity * static_cast<double>(p.codewords);
  return s;
}

Scenario make_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  Scenario sc{cfg, NetworkGeometry::build(cfg.network), {}, {}};
  sc.noise = make_noise_model(sc.geometry, cfg.block_length, cfg.snr_rx_db);
  if (cfg.mode == CodebookMode::location_based) {
    sc.priors = build_priors(sc.geometry, cfg);
  } else {
    sc.priors.push_back(single_codebook_prior(sc.geometry, cfg, cfg.sc_thinning));
  }
  return sc;
}

}  // namespace cfura
