#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cfura/airlink.hpp"
#include "cfura/pipeline.hpp"
#include "cfura/state_evolution.hpp"

using namespace cfura;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig c = preset("desk");
  c.block_length = 64;
  c.codewords_per_location = 128;
  c.grid_order = 2;
  c.iterations = 4;
  c.se_samples = 4000;
  return c;
}

// One RU with one antenna and flat pathloss (exponent 0 gives gamma = 1/2 everywhere).
Scenario scalar_scenario(double activity, int codewords, int block) {
  ScenarioConfig c = preset("desk");
  c.network.n1 = 1;
  c.network.n2 = 1;
  c.network.antennas_per_ru = 1;
  c.network.pathloss_exponent = 0.0;
  c.snapshot_location = 0;
  c.activity_raster = {activity};
  c.codewords_per_location = codewords;
  c.block_length = block;
  c.grid_order = 1;
  return make_scenario(c);
}

}  // namespace

TEST(InitialCovariance, NoActivityIsThermalNoise) {
  ScenarioConfig c = small_config();
  c.activity_raster = {0.0};
  const Scenario sc = make_scenario(c);
  const CMatrix c1 = initial_covariance(sc.priors, sc.geometry, 0.3, 64);
  EXPECT_LT((c1 - 0.3 * CMatrix::Identity(24, 24)).norm(), 1e-15);
  EXPECT_LT((initial_covariance(sc.priors, 0.3, 64) - c1).norm(), 1e-15);
}

TEST(InitialCovariance, SingleCertainPointAddsItsProfile) {
  const auto g = NetworkGeometry::build({});
  const LocationPrior p = make_prior(g, 1.0, 64, g.position_grid(5, 1), {5}, {1.0});
  const CMatrix c1 = initial_covariance({p}, 0.01, 64);
  CMatrix expected = 0.01 * CMatrix::Identity(24, 24);
  expected.diagonal() += p.profiles[0].cast<Complex>();
  EXPECT_LT((c1 - expected).norm(), 1e-15);
}

TEST(InitialCovariance, GridFormulaIsLiteral) {
  const Scenario sc = make_scenario(small_config());
  const CMatrix c1 = initial_covariance(sc.priors, sc.noise.variance, sc.block_length());
  RVector d = RVector::Constant(24, sc.noise.variance);
  for (const auto& p : sc.priors) {
    for (std::size_t q = 0; q < p.profiles.size(); ++q) d += p.load(64) * p.activity * p.grid.weights[q] * p.profiles[q];
  }
  EXPECT_LT((c1.diagonal().real() - d).norm(), 1e-15 * d.norm());
  EXPECT_EQ((c1 - CMatrix(c1.diagonal().asDiagonal())).norm(), 0.0);
}

TEST(InitialCovariance, TrueModelMatchesMonteCarloOverPriorDraws) {
  const Scenario sc = make_scenario(preset("desk"));
  const CMatrix c1 = initial_covariance(sc.priors, sc.geometry, sc.noise.variance, sc.block_length());
  EXPECT_EQ((c1 - CMatrix(c1.diagonal().asDiagonal())).norm(), 0.0);
  // alpha_u E[x^H x] with x = a h, a ~ Bernoulli(lambda), over 1e5 draws per location.
  Rng rng(3);
  const Index n = 100000;
  RVector mc = RVector::Constant(24, sc.noise.variance);
  RVector var = RVector::Zero(24);
  for (const auto& p : sc.priors) {
    const CMatrix h = sample_active_channels(p, sc.geometry, n, rng);
    RVector acc = RVector::Zero(24), acc2 = RVector::Zero(24);
    for (Index i = 0; i < n; ++i) {
      const bool on = rng.bernoulli(p.activity);
      if (!on) continue;
      const RVector e = h.row(i).cwiseAbs2().transpose();
      acc += e;
      acc2 += e.cwiseAbs2();
    }
    const double a = p.load(sc.block_length());
    mc += a * acc / n;
    var += a * a * ((acc2 / n - (acc / n).cwiseAbs2()) / n);
  }
  for (Index f = 0; f < 24; ++f) EXPECT_NEAR(c1(f, f).real(), mc(f), 3.0 * std::sqrt(var(f)) + 1e-12) << f;
}

TEST(SeStep, InactiveDenoiserReturnsThermalNoise) {
  ScenarioConfig c = small_config();
  c.activity_raster = {0.0};
  const Scenario sc = make_scenario(c);
  SeOptions o;
  o.samples = 100;
  const CMatrix c1 = initial_covariance(sc.priors, sc.geometry, sc.noise.variance, sc.block_length());
  const SeStep s = se_step(c1, sc.priors, sc.geometry, sc.noise.variance, sc.block_length(), o, 1);
  EXPECT_LT((s.next - sc.noise.variance * CMatrix::Identity(24, 24)).norm(), 1e-18);
  for (const auto& q : s.onsager) EXPECT_EQ(q.norm(), 0.0);
}

TEST(SeStep, NearPerfectDenoiserLeavesThermalNoise) {
  const Scenario sc = scalar_scenario(1.0, 64, 64);
  SeOptions o;
  o.samples = 2000;
  const CMatrix tiny = CMatrix::Identity(1, 1) * 1e-14;
  const SeStep s = se_step(tiny, sc.priors, sc.geometry, 0.02, 64, o, 1);
  EXPECT_NEAR(s.next(0, 0).real(), 0.02, 1e-10);
}

TEST(SeStep, ScalarFixedPointMatchesClosedForm) {
  const double sigma2 = 0.05, gamma = 0.5, alpha = 0.5;
  const Scenario sc = scalar_scenario(1.0, 32, 64);
  for (const auto& p : sc.priors) ASSERT_NEAR(p.profiles[0](0), gamma, 1e-15);
  // c = sigma2 + alpha_total gamma c / (gamma + c), alpha_total summed over the two tiles.
  const double at = alpha * static_cast<double>(sc.num_locations());
  double c = 1.0;
  for (int i = 0; i < 2000; ++i) c = sigma2 + at * gamma * c / (gamma + c);
  SeOptions o;
  o.samples = 20000;
  o.seed = 5;
  const SeTrace tr = run_se(sc.priors, sc.geometry, sigma2, 64, 40, o);
  const double slope = at * gamma * gamma / ((gamma + c) * (gamma + c));
  // Per-step Monte Carlo relative error ~ 1/sqrt(n) on the interference term, amplified near the fixed point.
  const double tol = 3.0 * (c - sigma2) / std::sqrt(static_cast<double>(o.samples * sc.num_locations())) / (1.0 - slope);
  EXPECT_NEAR(tr.covariance.back()(0, 0).real(), c, tol);
}

TEST(RunSe, TraceShapeInvariantsAndDeterminism) {
  const Scenario sc = make_scenario(small_config());
  const SeTrace a = run_scenario_se(sc);
  const SeTrace b = run_scenario_se(sc);
  ASSERT_EQ(a.covariance.size(), 5u);
  ASSERT_EQ(a.mse.size(), 5u);
  EXPECT_EQ(a.iterations(), 4);
  EXPECT_DOUBLE_EQ(a.mse[0], 1.0);
  for (std::size_t t = 0; t < a.covariance.size(); ++t) {
    const CMatrix& c = a.covariance[t];
    EXPECT_EQ((c - c.adjoint()).norm(), 0.0);
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(c - sc.noise.variance * CMatrix::Identity(24, 24));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-15 * c.norm());
    EXPECT_EQ((c - b.covariance[t]).norm(), 0.0);
  }
  for (std::size_t t = 1; t < a.mse.size(); ++t) EXPECT_LE(a.mse[t], a.mse[t - 1] * (1.0 + 1e-3));
}

TEST(RunSe, SingleIterationPredictsUnitMse) {
  const Scenario sc = make_scenario(small_config());
  SeOptions o = se_options(sc);
  o.samples = 200;
  const SeTrace tr = run_se(sc.priors, sc.geometry, sc.noise.variance, sc.block_length(), 1, o);
  EXPECT_EQ(tr.iterations(), 1);
  EXPECT_DOUBLE_EQ(tr.mse.front(), 1.0);
  EXPECT_LT((tr.at(1) - initial_covariance(sc.priors, sc.geometry, sc.noise.variance, 64)).norm(), 1e-18);
  EXPECT_THROW(run_se(sc.priors, sc.geometry, sc.noise.variance, 64, 0, o), ConfigError);
}

TEST(RunSe, MatchedNoWorseThanMismatched) {
  ScenarioConfig c = small_config();
  const SeTrace matched = run_scenario_se(make_scenario(c));
  c.denoiser = DenoiserMode::mismatched;
  const SeTrace mism = run_scenario_se(make_scenario(c));
  for (std::size_t t = 0; t < matched.mse.size(); ++t) {
    // common random numbers keep the Monte Carlo noise of the difference small
    EXPECT_LE(matched.mse[t], mism.mse[t] * (1.0 + 3.0 / std::sqrt(static_cast<double>(c.se_samples)))) << t;
  }
}

TEST(RunSe, DoublingSamplesStaysWithinSeedSpread) {
  ScenarioConfig c = small_config();
  c.iterations = 3;
  std::vector<double> traces;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    c.seed = seed;
    traces.push_back(run_scenario_se(make_scenario(c)).covariance.back().trace().real());
  }
  double mean = 0.0;
  for (double v : traces) mean += v / traces.size();
  double var = 0.0;
  for (double v : traces) var += (v - mean) * (v - mean) / (traces.size() - 1);
  c.seed = 1;
  c.se_samples *= 2;
  const double doubled = run_scenario_se(make_scenario(c)).covariance.back().trace().real();
  // sd at 2n is sd(n)/sqrt(2)
  EXPECT_NEAR(doubled, traces[0], 3.0 * std::sqrt(var * 1.5));
}

TEST(RunSe, CsvAndJsonSerialization) {
  const Scenario sc = make_scenario(small_config());
  SeOptions o = se_options(sc);
  o.samples = 200;
  const SeTrace tr = run_se(sc.priors, sc.geometry, sc.noise.variance, 64, 2, o);
  const auto dir = std::filesystem::temp_directory_path() / "cfura_se_test";
  std::filesystem::create_directories(dir);
  write_se_csv(dir / "se.csv", tr, "abc");
  write_se_json(dir / "se.json", tr);
  std::ifstream csv(dir / "se.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "manifest_hash,t,se_mse,trace_c");
  int rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_EQ(line.rfind("abc," + std::to_string(rows + 1) + ",", 0), 0u);
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  std::ifstream js(dir / "se.json");
  const auto j = nlohmann::json::parse(js);
  EXPECT_EQ(j["covariance"].size(), 3u);
  EXPECT_EQ(j["covariance"][0]["re"].size(), 24u);
  EXPECT_DOUBLE_EQ(j["covariance"][1]["re"][3][3].get<double>(), tr.covariance[1](3, 3).real());
  std::filesystem::remove_all(dir);
}

TEST(SeStep, RejectsBadInputs) {
  const Scenario sc = make_scenario(small_config());
  SeOptions o;
  o.samples = 1;
  const CMatrix c1 = CMatrix::Identity(24, 24);
  EXPECT_THROW(se_step(c1, sc.priors, sc.geometry, 0.1, 64, o, 1), ConfigError);
  o.samples = 10;
  EXPECT_THROW(se_step(CMatrix::Identity(3, 3), sc.priors, sc.geometry, 0.1, 64, o, 1), ConfigError);
  EXPECT_THROW(se_step(-c1, sc.priors, sc.geometry, 0.1, 64, o, 2), NumericalError);
}
