#include <gtest/gtest.h>

#include <cmath>

#include "cfura/positioning.hpp"
#include "test_support.hpp"

using namespace cfura;

namespace {

LocationPrior prior_with_profiles(std::vector<RVector> profiles) {
  LocationPrior p;
  p.activity = 0.1;
  p.codewords = 8;
  for (std::size_t q = 0; q < profiles.size(); ++q) {
    p.grid.points.push_back({0.01 * static_cast<double>(q), 0.0});
    p.grid.weights.push_back(1.0 / static_cast<double>(profiles.size()));
  }
  p.profiles = std::move(profiles);
  p.support_tiles = {0};
  p.support_weights = {1.0};
  return p;
}

}  // namespace

TEST(MapPosition, SinglePointGridIsIndexZero) {
  Rng rng(1);
  const LocationPrior p = cfura::testing::random_prior(6, 1, 0.2, rng);
  const Denoiser d(p, cfura::testing::random_hpd(6, rng, 0.1, 1.0));
  for (int k = 0; k < 5; ++k) EXPECT_EQ(map_position(d, cfura::testing::random_row(6, rng, 1.0)), 0);
}

TEST(MapPosition, TwoPointDiagonalObjectiveMatchesFormula) {
  RVector a(3), b(3);
  a << 1.0, 0.01, 0.01;
  b << 0.01, 0.01, 1.0;
  const LocationPrior p = prior_with_profiles({a, b});
  RVector c(3);
  c << 0.1, 0.2, 0.05;
  const Denoiser d(p, CMatrix(c.cast<Complex>().asDiagonal()));
  CRow r(3);
  r << Complex(0.1, 0.2), Complex(-0.3, 0.0), Complex(1.2, -0.4);
  RVector obj;
  EXPECT_EQ(map_position(d, r, &obj), 1);
  for (Index q = 0; q < 2; ++q) {
    const RVector& s = q == 0 ? a : b;
    double expected = std::log(0.5);
    for (Index f = 0; f < 3; ++f) expected -= std::log(s(f) + c(f)) + std::norm(r(f)) / (s(f) + c(f));
    EXPECT_NEAR(obj(q), expected, 1e-12);
  }
  r << Complex(1.2, -0.4), Complex(-0.3, 0.0), Complex(0.1, 0.2);
  EXPECT_EQ(map_position(d, r), 0);
}

TEST(MapPosition, TieGoesToSmallestIndex) {
  RVector a = RVector::Constant(4, 0.5);
  const LocationPrior p = prior_with_profiles({a, a, a});
  const Denoiser d(p, CMatrix::Identity(4, 4));
  Rng rng(2);
  EXPECT_EQ(map_position(d, cfura::testing::random_row(4, rng, 1.0)), 0);
}

TEST(MapPosition, AgreesWithPosteriorOverGrid) {
  // The objective is the log posterior of (a = 1, q) up to a q-independent constant.
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const LocationPrior p = cfura::testing::random_prior(8, 9, 0.05, rng);
    const Denoiser d(p, cfura::testing::random_hpd(8, rng, 0.05, 0.5));
    const CRow r = cfura::testing::random_row(8, rng, 1.0);
    RVector obj;
    const Index q = map_position(d, r, &obj);
    const RVector post = d.active_posterior(r);
    Index best = 0;
    for (Index i = 1; i < post.size(); ++i) {
      if (post(i) > post(best)) best = i;
    }
    EXPECT_EQ(q, best);
    const RVector shift = obj.array() - post.array().log();
    EXPECT_LT(shift.maxCoeff() - shift.minCoeff(), 1e-9 * (1.0 + shift.cwiseAbs().maxCoeff()));
  }
}

TEST(EstimatePosition, OracleNeverWorseThanMap) {
  const auto g = NetworkGeometry::build({});
  const PositionGrid grid = g.position_grid(5, 4);
  const LocationPrior p = make_prior(g, 0.1, 8, grid, {5}, {1.0});
  const Denoiser d(p, 1e-4 * CMatrix::Identity(24, 24));
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const Point2D truth = g.sample_in_tile(5, rng);
    CRow r(24);
    const RVector prof = g.covariance_profile(truth);
    for (Index f = 0; f < 24; ++f) r(f) = rng.complex_normal(prof(f)) + rng.complex_normal(1e-4);
    const PositionEstimate e = estimate_position(d, grid, g, r, truth, 5, 3);
    EXPECT_EQ(e.oracle_index, g.nearest_grid_point(grid, truth));
    EXPECT_LE(e.oracle_error, e.error + 1e-15);
    EXPECT_DOUBLE_EQ(e.error, g.distance(e.estimate, truth));
    EXPECT_EQ(e.location, 5);
    EXPECT_EQ(e.codeword, 3);
  }
  EXPECT_THROW(estimate_position(d, g.position_grid(5, 2), g, CRow::Zero(24), {0, 0}, 0, 0), ConfigError);
}

TEST(ErrorCdf, StepFunctionOnKnownSample) {
  std::vector<PositionEstimate> est(4);
  const double errs[] = {0.01, 0.02, 0.02, 0.05};
  for (int i = 0; i < 4; ++i) {
    est[i].error = errs[i];
    est[i].oracle_error = 0.005;
  }
  const CdfTable t = error_cdf(est, {0.0, 0.01, 0.015, 0.02, 0.1});
  EXPECT_EQ(t.samples, 4);
  EXPECT_EQ(t.map_cdf, (std::vector<double>{0.0, 0.25, 0.25, 0.75, 1.0}));
  EXPECT_EQ(t.oracle_cdf, (std::vector<double>{0.0, 1.0, 1.0, 1.0, 1.0}));
}

TEST(KsDistance, ExactValues) {
  EXPECT_DOUBLE_EQ(ks_distance({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(ks_distance({1, 2, 3}, {2, 3, 4}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(ks_distance({1, 2}, {5, 6, 7}), 1.0);
  EXPECT_DOUBLE_EQ(ks_distance({1, 1, 1, 2}, {1, 2}), 0.25);
  EXPECT_THROW(ks_distance({}, {1.0}), ConfigError);
}

TEST(KsDistance, MatchesBruteForceOverPooledPoints) {
  Rng rng(5);
  std::vector<double> a(37), b(23);
  for (auto& x : a) x = std::round(10.0 * rng.uniform()) / 10.0;
  for (auto& x : b) x = std::round(10.0 * rng.uniform()) / 10.0;
  double brute = 0.0;
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  for (double x : pts) {
    double fa = 0.0, fb = 0.0;
    for (double v : a) fa += v <= x;
    for (double v : b) fb += v <= x;
    brute = std::max(brute, std::abs(fa / a.size() - fb / b.size()));
  }
  EXPECT_NEAR(ks_distance(a, b), brute, 1e-15);
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_THROW(median({}), ConfigError);
}
