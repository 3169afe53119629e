#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cfura/airlink.hpp"

using namespace cfura;

namespace {

Scenario tiny(double activity, Index codewords = 32, int block = 16) {
  ScenarioConfig c = preset("desk");
  c.activity_raster = {activity};
  c.codewords_per_location = static_cast<int>(codewords);
  c.block_length = block;
  return make_scenario(c);
}

}  // namespace

TEST(Codebook, EntryVarianceAndColumnNorms) {
  Rng rng(1);
  const Index L = 1024, N = 1000;
  const CMatrix s = sample_codebook(L, N, rng);
  const double var = s.cwiseAbs2().mean();
  EXPECT_NEAR(var, 1.0 / L, 0.01 / L);
  EXPECT_LT(std::abs(s.mean()), 4.0 * std::sqrt(1.0 / L / (L * N)));
  const RVector norms = s.colwise().squaredNorm().transpose();
  // ||s||^2 is Gamma(L, 1/L): variance 1/L per column
  EXPECT_NEAR(norms.mean(), 1.0, 3.0 * std::sqrt(1.0 / L / N));
  EXPECT_THROW(sample_codebook(0, 3, rng), ConfigError);
}

TEST(Codebook, FixedSeedIsBitIdentical) {
  Rng a(99), b(99);
  const CMatrix x = sample_codebook(8, 5, a);
  const CMatrix y = sample_codebook(8, 5, b);
  EXPECT_EQ((x - y).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GroundTruth, ZeroActivityGivesZeroChannels) {
  const Scenario sc = tiny(0.0);
  Rng rng(2);
  const GroundTruth t = sample_ground_truth(sc.priors, sc.geometry, rng);
  EXPECT_EQ(t.total_active(), 0);
  EXPECT_EQ(t.channel_energy(), 0.0);
  for (const auto& l : t.locations) EXPECT_EQ(l.channels.norm(), 0.0);
}

TEST(GroundTruth, CertainActivitySingleCodeword) {
  const auto g = NetworkGeometry::build({});
  const LocationPrior p = make_prior(g, 1.0, 1, g.position_grid(0, 2), {0}, {1.0});
  Rng rng(3);
  const GroundTruth t = sample_ground_truth({p}, g, rng);
  ASSERT_EQ(t.total_active(), 1);
  EXPECT_EQ(t.locations[0].active, std::vector<Index>{0});
  EXPECT_EQ(g.locate_tile(t.locations[0].positions[0]), 0);
  EXPECT_GT(t.locations[0].channels.norm(), 0.0);
}

TEST(GroundTruth, InactiveRowsZeroAndActiveSorted) {
  const Scenario sc = tiny(0.3, 64);
  Rng rng(4);
  const GroundTruth t = sample_ground_truth(sc.priors, sc.geometry, rng);
  for (std::size_t u = 0; u < t.locations.size(); ++u) {
    const auto& l = t.locations[u];
    EXPECT_TRUE(std::is_sorted(l.active.begin(), l.active.end()));
    ASSERT_EQ(l.active.size(), l.positions.size());
    std::vector<bool> on(64, false);
    for (Index n : l.active) on[static_cast<std::size_t>(n)] = true;
    for (Index n = 0; n < 64; ++n) {
      if (!on[static_cast<std::size_t>(n)]) EXPECT_EQ(l.channels.row(n).norm(), 0.0);
    }
    for (const auto& q : l.positions) EXPECT_EQ(sc.geometry.locate_tile(q), static_cast<Index>(u));
  }
}

TEST(GroundTruth, ChannelPowerMatchesProfileAtDrawnPosition) {
  const Scenario sc = tiny(0.5);
  Rng rng(5);
  const auto& prior = sc.priors[3];
  const Index n = 10000;
  std::vector<Point2D> pos;
  const CMatrix h = sample_active_channels(prior, sc.geometry, n, rng, &pos);
  ASSERT_EQ(static_cast<Index>(pos.size()), n);
  for (Index f = 0; f < h.cols(); f += 5) {
    // |h_f|^2 / gamma_f(q) is Exp(1) per draw
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) acc += std::norm(h(i, f)) / sc.geometry.covariance_profile(pos[static_cast<std::size_t>(i)])(f);
    EXPECT_NEAR(acc / n, 1.0, 3.0 / std::sqrt(static_cast<double>(n))) << f;
  }
}

TEST(GroundTruth, ExpectedRowEnergyMatchesMonteCarlo) {
  const Scenario sc = tiny(0.25);
  Rng rng(6);
  const auto& prior = sc.priors[1];
  const Index n = 40000;
  const CMatrix h = sample_active_channels(prior, sc.geometry, n, rng);
  const RVector e = h.rowwise().squaredNorm().real();
  const double mean = e.mean();
  const double sd = std::sqrt((e.array() - mean).square().sum() / (n - 1) / n);
  EXPECT_NEAR(prior.activity * mean, expected_row_energy(prior, sc.geometry), 3.0 * prior.activity * sd);
  EXPECT_NEAR(expected_profile(prior, sc.geometry).sum(), expected_row_energy(prior, sc.geometry) / prior.activity, 1e-12);
}

TEST(Synthesize, NoActivesNoNoiseIsZero) {
  const Scenario sc = tiny(0.0);
  Rng rng(7);
  const auto cb = sample_codebooks(sc.priors, sc.block_length(), rng);
  const GroundTruth t = sample_ground_truth(sc.priors, sc.geometry, rng);
  EXPECT_EQ(synthesize(cb, t, 0.0, rng).y.norm(), 0.0);
}

TEST(Synthesize, PureNoisePower) {
  const Scenario sc = tiny(0.0, 4, 1024);
  Rng rng(8);
  const auto cb = sample_codebooks(sc.priors, sc.block_length(), rng);
  const GroundTruth t = sample_ground_truth(sc.priors, sc.geometry, rng);
  const double v = 0.37;
  const ReceivedSignal y = synthesize(cb, t, v, rng);
  const double n = static_cast<double>(y.y.size());
  // |w|^2 ~ Exp(v): sd of the mean is v / sqrt(n)
  EXPECT_NEAR(y.y.squaredNorm() / n, v, 3.0 * v / std::sqrt(n));
}

TEST(Synthesize, SingleActivePowerAccounting) {
  const auto g = NetworkGeometry::build({});
  const Index L = 64, F = g.num_antennas();
  const double noise = 0.01;
  const int trials = 3000;
  double total = 0.0, total2 = 0.0;
  double expected = 0.0;
  for (int k = 0; k < trials; ++k) {
    Rng rng(1000 + k);
    std::vector<CMatrix> cb{sample_codebook(L, 1, rng)};
    GroundTruth t;
    LocationTruth lt;
    lt.active = {0};
    lt.positions = {g.tile(0).centroid};
    lt.channels = CMatrix::Ones(1, F);
    t.locations.push_back(lt);
    const double p = synthesize(cb, t, noise, rng).y.squaredNorm();
    total += p;
    total2 += p * p;
  }
  expected = static_cast<double>(F) * 1.0 + noise * L * F;
  const double mean = total / trials;
  const double sd = std::sqrt((total2 / trials - mean * mean) / trials);
  EXPECT_NEAR(mean, expected, 3.0 * sd);
}

TEST(Synthesize, SignalPowerBudget) {
  const Scenario sc = tiny(0.2, 64, 128);
  Rng rng(9);
  const GroundTruth t = sample_ground_truth(sc.priors, sc.geometry, rng);
  const int trials = 400;
  double acc = 0.0, acc2 = 0.0;
  for (int k = 0; k < trials; ++k) {
    Rng rc(5000 + k);
    const auto cb = sample_codebooks(sc.priors, sc.block_length(), rc);
    const double p = synthesize(cb, t, 0.0, rc).y.squaredNorm();
    acc += p;
    acc2 += p * p;
  }
  const double mean = acc / trials;
  const double sd = std::sqrt((acc2 / trials - mean * mean) / trials);
  EXPECT_NEAR(mean, t.channel_energy(), 3.0 * sd);
}

TEST(Synthesize, ShapeMismatchRejected) {
  const Scenario sc = tiny(0.1);
  Rng rng(10);
  auto cb = sample_codebooks(sc.priors, sc.block_length(), rng);
  const GroundTruth t = sample_ground_truth(sc.priors, sc.geometry, rng);
  cb[2] = CMatrix::Zero(sc.block_length(), 3);
  EXPECT_THROW(synthesize(cb, t, 0.1, rng), ConfigError);
  cb.pop_back();
  EXPECT_THROW(synthesize(cb, t, 0.1, rng), ConfigError);
}

TEST(SlotDump, RoundTrip) {
  const Scenario sc = tiny(0.2);
  Rng rng(11);
  SlotDump d;
  d.seed = 1234;
  const auto cb = sample_codebooks(sc.priors, sc.block_length(), rng);
  d.truth = sample_ground_truth(sc.priors, sc.geometry, rng);
  d.signal = synthesize(cb, d.truth, 0.05, rng);
  const auto path = std::filesystem::temp_directory_path() / "cfura_slot_test.bin";
  write_slot_dump(path, d);
  const SlotDump back = read_slot_dump(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.seed, 1234u);
  EXPECT_EQ(back.signal.noise_variance, 0.05);
  EXPECT_EQ((back.signal.y - d.signal.y).norm(), 0.0);
  ASSERT_EQ(back.truth.locations.size(), d.truth.locations.size());
  for (std::size_t u = 0; u < d.truth.locations.size(); ++u) {
    EXPECT_EQ(back.truth.locations[u].active, d.truth.locations[u].active);
    EXPECT_EQ((back.truth.locations[u].channels - d.truth.locations[u].channels).norm(), 0.0);
  }
  EXPECT_THROW(read_slot_dump(path), ConfigError);
}
