#include "cfura/manifest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include <json.hpp>
#include <openssl/evp.h>

#include "cfura/config.hpp"
#include "cfura/rng.hpp"

namespace cfura {

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string manifest_hash(const ScenarioConfig& cfg, std::string_view experiment) {
  std::string text = "experiment = \"" + std::string(experiment) + "\"\n";
  text += to_toml(cfg);
  return git_blob_sha1(text);
}

RunManifest make_manifest(const ScenarioConfig& cfg, std::string_view experiment) {
  RunManifest m;
  m.experiment = std::string(experiment);
  m.config = cfg;
  m.hash = manifest_hash(cfg, experiment);
  return m;
}

namespace {

nlohmann::json point(Point2D p) { return {p.x, p.y}; }

}  // namespace

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest, const Scenario& scenario) {
  nlohmann::json j;
  j["experiment"] = manifest.experiment;
  j["manifest_hash"] = manifest.hash;
  j["config_toml"] = to_toml(manifest.config);
  j["seed"] = manifest.config.seed;
  nlohmann::json streams = nlohmann::json::object();
  for (Stream s : {Stream::codebook, Stream::truth, Stream::noise, Stream::state_evolution, Stream::calibration,
                   Stream::genie}) {
    streams[std::string(stream_name(s))] = static_cast<std::uint64_t>(s);
  }
  j["substreams"] = streams;
  j["wall_seconds"] = manifest.deterministic ? 0.0 : manifest.wall_seconds;
  j["deterministic"] = manifest.deterministic;
  j["threads"] = manifest.threads;
  j["artifacts"] = manifest.artifacts;

  const auto& g = scenario.geometry;
  nlohmann::json geo;
  geo["torus"] = {{"b1", point(g.torus().b1)}, {"b2", point(g.torus().b2)}, {"n1", g.torus().n1}, {"n2", g.torus().n2}};
  geo["antennas_per_ru"] = g.antennas_per_ru();
  geo["pathloss_exponent"] = g.params().pathloss_exponent;
  geo["cutoff_km"] = g.params().cutoff_km;
  nlohmann::json rus = nlohmann::json::array();
  for (const auto& p : g.ru_positions()) rus.push_back(point(p));
  geo["ru_positions"] = rus;
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& t : g.tiles()) {
    nlohmann::json tj;
    tj["id"] = t.id;
    tj["upward"] = t.upward;
    tj["centroid"] = point(t.centroid);
    tj["vertices"] = {point(t.vertices[0]), point(t.vertices[1]), point(t.vertices[2])};
    tiles.push_back(tj);
  }
  geo["tiles"] = tiles;
  j["geometry"] = geo;

  nlohmann::json locs = nlohmann::json::array();
  for (const auto& p : scenario.priors) {
    nlohmann::json lj;
    lj["activity"] = p.activity;
    lj["codewords"] = p.codewords;
    lj["support_tiles"] = p.support_tiles;
    lj["support_weights"] = p.support_weights;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& q : p.grid.points) pts.push_back(point(q));
    lj["grid_points"] = pts;
    lj["grid_weights"] = p.grid.weights;
    locs.push_back(lj);
  }
  j["locations"] = locs;
  j["noise"] = {{"snr_linear", scenario.noise.snr}, {"variance", scenario.noise.variance}};

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace cfura
