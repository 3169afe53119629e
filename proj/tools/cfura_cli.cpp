#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfura/config.hpp"
#include "cfura/experiments.hpp"
#include "cfura/parallel.hpp"

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string preset = "desk";
  std::string out_dir = "out";
  unsigned threads = 0;
  bool deterministic = false;
  std::vector<std::string> overrides;
  bool quiet = false;
};

cfura::ScenarioConfig resolve(const GlobalOptions& g) {
  cfura::ScenarioConfig cfg = cfura::preset(g.preset);
  if (!g.config.empty()) cfg = cfura::load_config_file(g.config, cfg);
  if (g.seed) cfg.seed = *g.seed;
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cfura::ConfigError("--set expects key=value, got '" + kv + "'");
    cfura::apply_config(cfg, cfura::parse_toml(kv.substr(0, eq) + " = " + kv.substr(eq + 1)));
  }
  cfura::validate(cfg);
  return cfg;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multisource AMP simulator for location-based unsourced random access in cell-free networks"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "TOML scenario file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master RNG seed");
  app.add_option("--preset", g.preset, "base parameter set")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--out-dir", g.out_dir, "directory for CSV, JSON and manifest output");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_flag("--deterministic", g.deterministic, "zero timing fields for byte-identical output");
  app.add_option("--set", g.overrides, "override a config key, e.g. --set runs=4 (repeatable)");
  app.add_flag("-q,--quiet", g.quiet, "suppress progress messages");

  auto* se = app.add_subcommand("se-compare", "normalized MSE of AMP vs state evolution");
  auto* roc = app.add_subcommand("roc", "missed-detection / false-alarm tradeoff");
  auto* cdf = app.add_subcommand("position-cdf", "position error CDFs against the grid oracle");
  auto* snap = app.add_subcommand("position-snapshot", "position objective over one tile's grid");
  auto* mse = app.add_subcommand("channel-mse", "channel estimation MSE vs received SNR");
  auto* check = app.add_subcommand("validate-config", "resolve and print the configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    const cfura::ScenarioConfig cfg = resolve(g);
    if (check->parsed()) {
      std::cout << cfura::to_toml(cfg);
      return 0;
    }
    cfura::set_num_threads(g.deterministic ? 1 : g.threads);
    cfura::ExperimentContext ctx;
    ctx.out_dir = g.out_dir;
    ctx.deterministic = g.deterministic;
    if (!g.quiet) ctx.log = [](const std::string& m) { std::cerr << m << '\n'; };

    if (se->parsed()) {
      const auto r = cfura::run_se_comparison(cfg, ctx);
      for (const auto& c : r.curves) {
        std::cout << c.variant.label() << ": final sim " << fmt(c.sim_mean.back()) << " se " << fmt(c.se_mse.back())
                  << ", decoupling " << fmt(c.decoupling_error) << '\n';
      }
    } else if (roc->parsed()) {
      const auto r = cfura::run_roc(cfg, ctx);
      for (const auto& x : r.results) {
        std::cout << x.variant.label() << ": P_FA " << fmt(x.p_fa()) << " P_MD " << fmt(x.p_md()) << " equal-error "
                  << fmt(x.equal_error()) << " +- " << fmt(x.equal_error_sigma()) << '\n';
      }
    } else if (cdf->parsed()) {
      const auto r = cfura::run_position_cdf(cfg, ctx);
      for (const auto& x : r.results) {
        std::cout << x.variant.label() << ": " << x.estimates.size() << " detected, median error "
                  << fmt(x.median_error) << " km (oracle " << fmt(x.median_oracle_error) << "), KS " << fmt(x.ks)
                  << '\n';
      }
    } else if (snap->parsed()) {
      const auto r = cfura::run_position_snapshot(cfg, ctx);
      std::cout << "location " << r.location << " codeword " << r.codeword << " run " << r.run << ": MAP index "
                << r.map_index << " of " << r.grid.size() << '\n';
    } else if (mse->parsed()) {
      const auto r = cfura::run_channel_mse_sweep(cfg, ctx);
      for (const auto& p : r.points) {
        std::cout << p.snr_rx_db << " dB " << p.estimator << ": " << (p.mse ? fmt(*p.mse) : std::string("n/a")) << '\n';
      }
    }
    return 0;
  } catch (const cfura::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cfura::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
