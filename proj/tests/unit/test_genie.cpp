#include <gtest/gtest.h>

#include <cmath>

#include "cfura/genie_mmse.hpp"

using namespace cfura;

namespace {

struct Network {
  NetworkGeometry g = NetworkGeometry::build({});
  std::vector<CMatrix> codebooks;
  GroundTruth truth;
};

// Locations 0 and 1 with the given active codewords, users at tile points, L x 6 codebooks.
Network make_setup(Index L, const std::vector<Index>& a0, const std::vector<Index>& a1, std::uint64_t seed) {
  Network s;
  Rng rng(seed);
  const Index F = s.g.num_antennas();
  for (int u = 0; u < 2; ++u) {
    s.codebooks.push_back(sample_codebook(L, 6, rng));
    LocationTruth lt;
    lt.active = u == 0 ? a0 : a1;
    lt.channels = CMatrix::Zero(6, F);
    for (Index n : lt.active) {
      const Point2D q = s.g.sample_in_tile(u, rng);
      lt.positions.push_back(q);
      const RVector prof = s.g.covariance_profile(q);
      for (Index f = 0; f < F; ++f) lt.channels(n, f) = rng.complex_normal(prof(f));
    }
    s.truth.locations.push_back(lt);
  }
  return s;
}

}  // namespace

TEST(Genie, NoActivesLeavesThermalNoise) {
  const Network s = make_setup(16, {}, {}, 1);
  const GenieContext ctx(s.codebooks, s.truth, s.g, 0.2);
  EXPECT_EQ(ctx.num_active(), 0);
  for (Index b = 0; b < s.g.num_rus(); ++b) EXPECT_EQ((ctx.covariance(b) - 0.2 * CMatrix::Identity(16, 16)).norm(), 0.0);
  EXPECT_EQ(ctx.estimate_all(CMatrix::Ones(16, 24)).rows(), 0);
  EXPECT_THROW(ctx.estimate_channel(0, 0, CMatrix::Ones(16, 24)), ConfigError);
}

TEST(Genie, SingleActiveShermanMorrison) {
  const Network s = make_setup(32, {2}, {}, 2);
  const double sigma2 = 0.05;
  const GenieContext ctx(s.codebooks, s.truth, s.g, sigma2);
  const CVector sv = s.codebooks[0].col(2);
  const double e = sv.squaredNorm();
  for (Index b = 0; b < s.g.num_rus(); ++b) {
    const double gam = s.g.pathloss(b, s.truth.locations[0].positions[0]);
    const double expected = gam * sigma2 / (sigma2 + gam * e);
    EXPECT_NEAR(ctx.analytic_mse(0, 2, b), expected, 1e-12 * gam);
    const CMatrix& c = ctx.covariance(b);
    EXPECT_EQ((c - c.adjoint()).norm(), 0.0);
  }
  EXPECT_EQ(*ctx.find(0, 2), 0);
  EXPECT_FALSE(ctx.find(0, 3).has_value());
  EXPECT_THROW(ctx.analytic_mse(1, 2, 0), ConfigError);
}

TEST(Genie, NoiseLimits) {
  const Network s = make_setup(32, {1, 4}, {0}, 3);
  const GenieContext loud(s.codebooks, s.truth, s.g, 1e12);
  const GenieContext quiet(s.codebooks, s.truth, s.g, 1e-12);
  // small-noise limit: sigma^2 [(S_A^H S_A)^{-1}]_kk, independent of the gains
  const CMatrix gram = loud.active_codewords().adjoint() * loud.active_codewords();
  const CMatrix gram_inv = gram.inverse();
  for (Index k = 0; k < loud.num_active(); ++k) {
    const auto [u, n] = loud.member(k);
    for (Index b = 0; b < s.g.num_rus(); ++b) {
      const double gam = loud.gains()(k, b);
      EXPECT_NEAR(loud.analytic_mse(u, n, b), gam, 1e-9 * gam);
      EXPECT_NEAR(quiet.analytic_mse(u, n, b), 1e-12 * gram_inv(k, k).real(), 1e-3 * 1e-12 * gram_inv(k, k).real());
    }
  }
}

TEST(Genie, EstimatorIsLinearAndRowsAgree) {
  const Network s = make_setup(24, {0, 5}, {3}, 4);
  const GenieContext ctx(s.codebooks, s.truth, s.g, 0.1);
  Rng rng(5);
  CMatrix y1(24, 24), y2(24, 24);
  fill_complex_normal(y1, 1.0, rng);
  fill_complex_normal(y2, 1.0, rng);
  const Complex a(0.3, -1.1);
  const CMatrix lhs = ctx.estimate_all(a * y1 + y2);
  const CMatrix rhs = a * ctx.estimate_all(y1) + ctx.estimate_all(y2);
  EXPECT_LT((lhs - rhs).norm(), 1e-12 * rhs.norm());
  const CMatrix all = ctx.estimate_all(y1);
  for (Index k = 0; k < ctx.num_active(); ++k) {
    const auto [u, n] = ctx.member(k);
    EXPECT_LT((ctx.estimate_channel(u, n, y1) - all.row(k)).norm(), 1e-13 * all.norm());
  }
  EXPECT_THROW(ctx.estimate_all(CMatrix::Zero(23, 24)), ConfigError);
}

TEST(Genie, ScalarWienerFilter) {
  // Single active message: the component MSE averages the scalar Wiener error over RUs.
  const Network s = make_setup(8, {0}, {}, 6);
  const GenieContext ctx(s.codebooks, s.truth, s.g, 0.3);
  const double e = s.codebooks[0].col(0).squaredNorm();
  double mean = 0.0;
  for (Index b = 0; b < s.g.num_rus(); ++b) {
    const double gam = ctx.gains()(0, b);
    mean += gam * 0.3 / (0.3 + gam * e) / static_cast<double>(s.g.num_rus());
  }
  EXPECT_NEAR(ctx.analytic_component_mse(0), mean, 1e-12 * mean);
}

TEST(Genie, MonteCarloMatchesAnalytic) {
  const Network s = make_setup(16, {0, 2, 3}, {1, 5}, 7);
  const double sigma2 = 0.01;
  const GenieContext ctx(s.codebooks, s.truth, s.g, sigma2);
  Rng rng(8);
  const auto mc = genie_monte_carlo(ctx, s.truth, s.g, sigma2, {{0, 2, 3}, {1, 5}}, 4000, rng);
  EXPECT_EQ(mc.draws, 4000);
  EXPECT_GT(mc.std_error, 0.0);
  EXPECT_NEAR(mc.empirical, mc.analytic, 3.0 * mc.std_error);
  EXPECT_THROW(genie_monte_carlo(ctx, s.truth, s.g, sigma2, {{4}, {}}, 10, rng), ConfigError);
  EXPECT_THROW(genie_monte_carlo(ctx, s.truth, s.g, sigma2, {{}, {}}, 10, rng), ConfigError);
  EXPECT_THROW(genie_monte_carlo(ctx, s.truth, s.g, sigma2, {{0}, {}}, 1, rng), ConfigError);
}

TEST(Genie, InterfererNeverHelps) {
  const Network one = make_setup(12, {1}, {}, 9);
  Network two = one;
  {
    Rng rng(10);
    LocationTruth& lt = two.truth.locations[1];
    lt.active = {4};
    lt.positions = {two.g.sample_in_tile(1, rng)};
  }
  const GenieContext a(one.codebooks, one.truth, one.g, 0.02);
  const GenieContext b(two.codebooks, two.truth, two.g, 0.02);
  for (Index r = 0; r < one.g.num_rus(); ++r) EXPECT_GE(b.analytic_mse(0, 1, r), a.analytic_mse(0, 1, r) * (1.0 - 1e-12));
}

TEST(AggregateMse, SkipsEmptyLocations) {
  EXPECT_DOUBLE_EQ(*aggregate_mse({{1.0, 3.0}, {}, {4.0}}), 3.0);
  EXPECT_FALSE(aggregate_mse({{}, {}}).has_value());
  EXPECT_FALSE(aggregate_mse({}).has_value());
}
