#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cfura/experiments.hpp"
#include "cfura/parallel.hpp"

using namespace cfura;
namespace fs = std::filesystem;

namespace {

ScenarioConfig tiny_config() {
  ScenarioConfig c = preset("desk");
  c.block_length = 48;
  c.codewords_per_location = 32;
  c.activity_raster = {0.05, 0.02};
  c.grid_order = 2;
  c.iterations = 3;
  c.se_samples = 200;
  c.calibration_samples = 200;
  c.runs = 2;
  c.genie_mc_draws = 20;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Manifest, GitBlobSha1KnownValues) {
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Manifest, HashIsStableAndSensitive) {
  const ScenarioConfig c = tiny_config();
  const std::string h = manifest_hash(c, "roc");
  EXPECT_EQ(h.size(), 40u);
  EXPECT_EQ(h, manifest_hash(c, "roc"));
  EXPECT_NE(h, manifest_hash(c, "se-compare"));
  ScenarioConfig d = c;
  d.seed += 1;
  EXPECT_NE(h, manifest_hash(d, "roc"));
}

TEST(Experiments, RepeatedRunsWriteIdenticalFilesAcrossThreadCounts) {
  const ScenarioConfig cfg = tiny_config();
  const fs::path a = fresh_dir("cfura_exp_a"), b = fresh_dir("cfura_exp_b");
  set_num_threads(1);
  run_se_comparison(cfg, {a, true, {}});
  run_roc(cfg, {a, true, {}});
  set_num_threads(4);
  run_se_comparison(cfg, {b, true, {}});
  run_roc(cfg, {b, true, {}});
  set_num_threads(0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    const fs::path other = b / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    if (e.path().filename().string().ends_with("_manifest.json")) {
      // manifests record the worker count; everything else must match
      auto ja = nlohmann::json::parse(slurp(e.path()));
      auto jb = nlohmann::json::parse(slurp(other));
      EXPECT_EQ(ja["threads"], 1);
      EXPECT_EQ(jb["threads"], 4);
      ja.erase("threads");
      jb.erase("threads");
      EXPECT_EQ(ja, jb) << e.path().filename();
    } else {
      EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    }
  }
  EXPECT_GT(files, 5);
  EXPECT_EQ(first_line(a / "se_compare.csv"),
            "manifest_hash,scenario,denoiser_mode,t,sim_mse_mean,sim_mse_stderr,sim_mse_pooled,se_mse,runs");
  EXPECT_EQ(first_line(a / "roc.csv"), "manifest_hash,scenario,denoiser_mode,tau_log,p_fa,p_md,n_trials");
  EXPECT_EQ(first_line(a / "roc_equal_error.csv"),
            "manifest_hash,scenario,denoiser_mode,p_fa,p_md,p_equal_error,sigma,n_active,n_inactive,n_trials");
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiments, ChannelSweepAndPositionOutputs) {
  ScenarioConfig cfg = tiny_config();
  cfg.snr_sweep_db = {0.0, 10.0};
  const fs::path d = fresh_dir("cfura_exp_c");
  const ExperimentContext ctx{d, true, {}};
  const auto sweep = run_channel_mse_sweep(cfg, ctx);
  EXPECT_TRUE(sweep.find(0.0, "genie").has_value());
  EXPECT_TRUE(sweep.find(10.0, "amp_matched").has_value());
  EXPECT_FALSE(sweep.find(5.0, "genie").has_value());
  EXPECT_EQ(first_line(d / "channel_mse.csv"), "manifest_hash,snr_rx_db,estimator,mse,runs,messages,locations");
  EXPECT_EQ(first_line(d / "genie_check.csv"), "manifest_hash,snr_rx_db,analytic,empirical,std_error,draws");
  const auto pos = run_position_cdf(cfg, ctx);
  ASSERT_EQ(pos.results.size(), 2u);
  EXPECT_EQ(first_line(d / "position_cdf.csv"), "manifest_hash,scenario,denoiser_mode,estimator,error_km,cdf,samples");
  const auto snap = run_position_snapshot(cfg, ctx);
  EXPECT_EQ(snap.objective.size(), snap.grid.size());
  EXPECT_EQ(first_line(d / "position_snapshot.csv"), "manifest_hash,kind,index,x,y,objective");
  fs::remove_all(d);
}

TEST(ParallelFor, CoversEveryIndexAndRethrowsLowestFailure) {
  set_num_threads(4);
  std::vector<int> hits(1000, 0);
  parallel_for(1000, [&](Index i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  try {
    parallel_for(100, [](Index i) {
      if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "17");
  }
  std::vector<int> nested(64, 0);
  parallel_for(8, [&](Index i) { parallel_for(8, [&](Index j) { nested[static_cast<std::size_t>(8 * i + j)] += 1; }); });
  for (int h : nested) EXPECT_EQ(h, 1);
  set_num_threads(0);
}
