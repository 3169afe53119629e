#include "cfura/airlink.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cfura {

CMatrix sample_codebook(Index block_length, Index codewords, Rng& rng) {
  if (block_length < 1 || codewords < 1) throw ConfigError("codebook dimensions must be >= 1");
  CMatrix s(block_length, codewords);
  fill_complex_normal(s, 1.0 / static_cast<double>(block_length), rng);
  return s;
}

std::vector<CMatrix> sample_codebooks(const std::vector<LocationPrior>& priors, Index block_length, Rng& rng) {
  std::vector<CMatrix> out;
  out.reserve(priors.size());
  for (const auto& p : priors) out.push_back(sample_codebook(block_length, p.codewords, rng));
  return out;
}

Index GroundTruth::total_active() const {
  Index n = 0;
  for (const auto& l : locations) n += static_cast<Index>(l.active.size());
  return n;
}

double GroundTruth::channel_energy() const {
  double e = 0.0;
  for (const auto& l : locations) e += l.channels.squaredNorm();
  return e;
}

Point2D sample_user_position(const LocationPrior& prior, const NetworkGeometry& g, Rng& rng) {
  if (prior.support_tiles.empty()) throw ConfigError("location prior has no user support");
  std::size_t pick = 0;
  if (prior.support_tiles.size() > 1) {
    const double u = rng.uniform();
    double acc = 0.0;
    pick = prior.support_tiles.size() - 1;
    for (std::size_t i = 0; i < prior.support_weights.size(); ++i) {
      acc += prior.support_weights[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
  }
  return g.sample_in_tile(prior.support_tiles[pick], rng);
}

CMatrix sample_active_channels(const LocationPrior& prior, const NetworkGeometry& g, Index n, Rng& rng,
                               std::vector<Point2D>* positions) {
  const Index F = g.num_antennas();
  CMatrix h(n, F);
  for (Index i = 0; i < n; ++i) {
    const Point2D q = sample_user_position(prior, g, rng);
    const RVector profile = g.covariance_profile(q);
    for (Index f = 0; f < F; ++f) h(i, f) = rng.complex_normal(profile(f));
    if (positions) positions->push_back(q);
  }
  return h;
}

RVector expected_profile(const LocationPrior& prior, const NetworkGeometry& g) {
  RVector m = RVector::Zero(g.num_antennas());
  for (std::size_t i = 0; i < prior.support_tiles.size(); ++i) {
    m += prior.support_weights[i] * g.mean_profile(prior.support_tiles[i]);
  }
  return m;
}

double expected_row_energy(const LocationPrior& prior, const NetworkGeometry& g) {
  return prior.activity * expected_profile(prior, g).sum();
}

GroundTruth sample_ground_truth(const std::vector<LocationPrior>& priors, const NetworkGeometry& g, Rng& rng) {
  const Index F = g.num_antennas();
  GroundTruth truth;
  truth.locations.reserve(priors.size());
  for (const auto& prior : priors) {
    LocationTruth lt;
    lt.channels = CMatrix::Zero(prior.codewords, F);
    for (Index n = 0; n < prior.codewords; ++n) {
      if (!rng.bernoulli(prior.activity)) continue;
      const Point2D q = sample_user_position(prior, g, rng);
      const RVector profile = g.covariance_profile(q);
      for (Index f = 0; f < F; ++f) lt.channels(n, f) = rng.complex_normal(profile(f));
      lt.active.push_back(n);
      lt.positions.push_back(q);
    }
    truth.locations.push_back(std::move(lt));
  }
  return truth;
}

ReceivedSignal synthesize(const std::vector<CMatrix>& codebooks, const GroundTruth& truth, double noise_variance,
                          Rng& rng) {
  if (codebooks.size() != truth.locations.size()) throw ConfigError("codebook/truth location count mismatch");
  if (codebooks.empty()) throw ConfigError("no locations to synthesize");
  const Index L = codebooks.front().rows();
  const Index F = truth.locations.front().channels.cols();
  ReceivedSignal out;
  out.noise_variance = noise_variance;
  out.y = CMatrix::Zero(L, F);
  for (std::size_t u = 0; u < codebooks.size(); ++u) {
    const auto& s = codebooks[u];
    const auto& x = truth.locations[u].channels;
    if (s.rows() != L || s.cols() != x.rows() || x.cols() != F) {
      throw ConfigError("shape mismatch between codebook and channel matrix at location " + std::to_string(u));
    }
    // Inactive rows of X_u are zero, so only active columns contribute.
    for (Index n : truth.locations[u].active) out.y.noalias() += s.col(n) * x.row(n);
  }
  if (noise_variance > 0.0) {
    CMatrix w(L, F);
    fill_complex_normal(w, noise_variance, rng);
    out.y += w;
  }
  return out;
}

namespace {

constexpr char kMagic[] = "CFURASLOT1\n";

void write_matrix(std::ofstream& out, const CMatrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Complex)));
}

CMatrix read_matrix(std::ifstream& in, Index rows, Index cols) {
  CMatrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(Complex)));
  if (!in) throw ConfigError("truncated slot dump");
  return m;
}

}  // namespace

void write_slot_dump(const std::filesystem::path& path, const SlotDump& dump) {
  nlohmann::json header;
  header["format"] = "cfura-slot";
  header["version"] = 1;
  header["seed"] = dump.seed;
  header["noise_variance"] = dump.signal.noise_variance;
  header["y_shape"] = {dump.signal.y.rows(), dump.signal.y.cols()};
  auto& locs = header["locations"];
  locs = nlohmann::json::array();
  for (const auto& l : dump.truth.locations) {
    nlohmann::json j;
    j["shape"] = {l.channels.rows(), l.channels.cols()};
    j["active"] = l.active;
    nlohmann::json pos = nlohmann::json::array();
    for (const auto& p : l.positions) pos.push_back({p.x, p.y});
    j["positions"] = pos;
    locs.push_back(j);
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write slot dump " + path.string());
  out.write(kMagic, sizeof(kMagic) - 1);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_matrix(out, dump.signal.y);
  for (const auto& l : dump.truth.locations) write_matrix(out, l.channels);
}

SlotDump read_slot_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open slot dump " + path.string());
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw ConfigError("not a slot dump: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ConfigError("truncated slot dump header");
  const auto header = nlohmann::json::parse(text);
  SlotDump dump;
  dump.seed = header.at("seed").get<std::uint64_t>();
  dump.signal.noise_variance = header.at("noise_variance").get<double>();
  const auto ys = header.at("y_shape");
  dump.signal.y = read_matrix(in, ys[0].get<Index>(), ys[1].get<Index>());
  for (const auto& j : header.at("locations")) {
    LocationTruth l;
    l.active = j.at("active").get<std::vector<Index>>();
    for (const auto& p : j.at("positions")) l.positions.push_back({p[0].get<double>(), p[1].get<double>()});
    l.channels = read_matrix(in, j.at("shape")[0].get<Index>(), j.at("shape")[1].get<Index>());
    dump.truth.locations.push_back(std::move(l));
  }
  return dump;
}

}  // namespace cfura
