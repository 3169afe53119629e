#include "cfura/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "cfura/parallel.hpp"

namespace cfura {

namespace {

using Clock = std::chrono::steady_clock;

void note(const ExperimentContext& ctx, const std::string& msg) {
  if (ctx.log) ctx.log(msg);
}

bool writing(const ExperimentContext& ctx) { return !ctx.out_dir.empty(); }

std::ofstream open_csv(const ExperimentContext& ctx, const std::string& name, const std::string& header,
                       std::vector<std::string>& artifacts) {
  std::filesystem::create_directories(ctx.out_dir);
  const auto path = ctx.out_dir / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  out << header << '\n';
  artifacts.push_back(name);
  return out;
}

void put(std::ostream& out, const std::optional<double>& v) {
  if (v) out << *v;
}

Scenario make_variant(const ScenarioConfig& cfg, const Variant& v, const ExperimentContext& ctx) {
  Scenario sc = make_scenario(variant_config(cfg, v));
  if (v.mode == CodebookMode::single_codebook && cfg.sc_thinning > 1 && v.denoiser == DenoiserMode::matched) {
    note(ctx, "warning: single-codebook grid thinned to order " +
                  std::to_string(thinned_order(cfg.grid_order, cfg.sc_thinning)) + " per tile (sc_thinning = " +
                  std::to_string(cfg.sc_thinning) + ")");
  }
  return sc;
}

void finish(const ExperimentContext& ctx, const std::string& experiment, const ScenarioConfig& cfg,
            const Scenario& scenario, std::vector<std::string> artifacts, Clock::time_point start) {
  if (!writing(ctx)) return;
  RunManifest m = make_manifest(cfg, experiment);
  m.deterministic = ctx.deterministic;
  m.threads = num_threads();
  m.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  const std::string name = experiment + "_manifest.json";
  artifacts.push_back(name);
  m.artifacts = std::move(artifacts);
  write_manifest(ctx.out_dir / name, m, scenario);
}

double frobenius_relative(const CMatrix& a, const CMatrix& ref) { return (a - ref).norm() / ref.norm(); }

// Per-location confusion for one decoded run.
std::vector<DetectionOutcome> detect(const AmpTrace& trace, const GroundTruth& truth,
                                     const std::vector<Calibration>& cal) {
  std::vector<DetectionOutcome> out;
  for (std::size_t u = 0; u < trace.np_scores.size(); ++u) {
    out.push_back(classify(trace.np_scores[u], cal[u].log_tau, truth.locations[u].active));
  }
  return out;
}

Point2D truth_position(const LocationTruth& lt, Index n) {
  const auto it = std::lower_bound(lt.active.begin(), lt.active.end(), n);
  if (it == lt.active.end() || *it != n) throw ConfigError("message is not active");
  return lt.positions[static_cast<std::size_t>(it - lt.active.begin())];
}

std::vector<double> roc_thresholds(const std::vector<LabeledScores>& data) {
  std::vector<double> act;
  std::vector<double> inact;
  for (const auto& d : data) {
    std::size_t k = 0;
    for (Index n = 0; n < d.scores.size(); ++n) {
      while (k < d.active.size() && d.active[k] < n) ++k;
      (k < d.active.size() && d.active[k] == n ? act : inact).push_back(d.scores(n));
    }
  }
  std::vector<double> taus = act;
  std::sort(inact.begin(), inact.end());
  if (!inact.empty()) {
    const double n = static_cast<double>(inact.size());
    for (int i = 0; i <= 120; ++i) {
      const double p = std::pow(10.0, -6.0 + 6.0 * i / 120.0);
      const auto from_top = static_cast<std::size_t>(std::ceil(p * n));
      const std::size_t idx = inact.size() - std::min(inact.size(), std::max<std::size_t>(from_top, 1));
      taus.push_back(inact[idx]);
    }
  }
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  return taus;
}

}  // namespace

ScenarioConfig variant_config(const ScenarioConfig& base, const Variant& v) {
  ScenarioConfig c = base;
  c.mode = v.mode;
  c.denoiser = v.denoiser;
  return c;
}

// ---- SE vs simulation ------------------------------------------------------------------------

SeComparison run_se_comparison(const ScenarioConfig& cfg, const ExperimentContext& ctx,
                               const std::vector<Variant>& variants) {
  validate(cfg);
  const auto start = Clock::now();
  const std::string experiment = "se-compare";
  SeComparison result;
  result.manifest_hash = manifest_hash(cfg, experiment);
  const int T = cfg.iterations;
  const int R = cfg.runs;

  struct RunStats {
    std::vector<std::optional<double>> mse;
    std::vector<AmpIteration> iterations;
    CMatrix residual;  // sum over rows of (R - X)^H (R - X)
    Index rows = 0;
    CMatrix c_emp;
    double energy = 0.0;  // sum_u ||X_u||_F^2
  };

  std::vector<std::string> artifacts;
  std::ofstream diag;
  if (writing(ctx)) {
    diag = open_csv(ctx, "amp_diagnostics.csv",
                    "manifest_hash,scenario,denoiser_mode,run,t,mse,trace_c,wall_seconds", artifacts);
  }
  std::optional<Scenario> first;
  for (const auto& v : variants) {
    const Scenario sc = make_variant(cfg, v, ctx);
    note(ctx, "se-compare: " + v.label() + " state evolution");
    const SeTrace se = run_scenario_se(sc);
    note(ctx, "se-compare: " + v.label() + " " + std::to_string(R) + " AMP runs");
    std::vector<RunStats> stats(static_cast<std::size_t>(R));
    parallel_for(R, [&](Index r) {
      const Slot slot = simulate_slot(sc, static_cast<std::uint64_t>(r));
      const AmpTrace trace = run_amp(slot.signal.y, slot.codebooks, sc.priors, sc.noise.variance,
                                     amp_options(sc, &se, &slot.truth));
      RunStats& s = stats[static_cast<std::size_t>(r)];
      for (const auto& it : trace.iterations) s.mse.push_back(it.mse);
      s.mse.resize(static_cast<std::size_t>(T));
      s.mse.push_back(trace.final_mse);
      s.iterations = trace.iterations;
      const Index F = slot.signal.y.cols();
      s.residual = CMatrix::Zero(F, F);
      for (std::size_t u = 0; u < trace.decoupled.size(); ++u) {
        const CMatrix d = trace.decoupled[u] - slot.truth.locations[u].channels;
        s.residual.noalias() += d.adjoint() * d;
        s.rows += d.rows();
      }
      s.c_emp = trace.final_residual_covariance;
      for (const auto& loc : slot.truth.locations) s.energy += loc.channels.squaredNorm();
    });

    SeCurve curve;
    curve.variant = v;
    curve.runs = R;
    curve.se_mse.assign(se.mse.begin(), se.mse.begin() + T + 1);
    for (int t = 0; t <= T; ++t) {
      double sum = 0.0;
      double sum2 = 0.0;
      double err = 0.0;
      double energy = 0.0;
      int n = 0;
      for (const auto& s : stats) {
        const auto& m = s.mse[static_cast<std::size_t>(t)];
        if (!m) continue;
        sum += *m;
        sum2 += *m * *m;
        err += *m * s.energy;
        energy += s.energy;
        ++n;
      }
      const double mean = n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
      const double var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1)) : 0.0;
      curve.sim_mean.push_back(mean);
      curve.sim_stderr.push_back(n > 0 ? std::sqrt(var / n) : 0.0);
      curve.sim_count.push_back(n);
      curve.sim_pooled.push_back(energy > 0.0 ? err / energy : std::numeric_limits<double>::quiet_NaN());
    }
    const CMatrix& c_se = se.at(T);
    CMatrix resid = CMatrix::Zero(c_se.rows(), c_se.cols());
    CMatrix c_emp = CMatrix::Zero(c_se.rows(), c_se.cols());
    Index rows = 0;
    for (const auto& s : stats) {
      resid += s.residual;
      rows += s.rows;
      c_emp += s.c_emp;
    }
    curve.decoupling_error = frobenius_relative(resid / static_cast<double>(rows), c_se);
    curve.empirical_c_error = frobenius_relative(c_emp / static_cast<double>(R), c_se);

    if (writing(ctx)) {
      for (int r = 0; r < R; ++r) {
        for (const auto& it : stats[static_cast<std::size_t>(r)].iterations) {
          diag << result.manifest_hash << ',' << v.scenario_name() << ',' << v.denoiser_name() << ',' << r << ','
               << it.t << ',';
          put(diag, it.mse);
          diag << ',' << it.trace_c << ',' << (ctx.deterministic ? 0.0 : it.wall_seconds) << '\n';
        }
      }
      const std::string base = "se_trace_" + v.label();
      write_se_csv(ctx.out_dir / (base + ".csv"), se, result.manifest_hash);
      write_se_json(ctx.out_dir / (base + ".json"), se);
      artifacts.push_back(base + ".csv");
      artifacts.push_back(base + ".json");
    }
    result.curves.push_back(std::move(curve));
    if (!first) first = sc;
  }

  if (writing(ctx)) {
    auto out = open_csv(ctx, "se_compare.csv",
                        "manifest_hash,scenario,denoiser_mode,t,sim_mse_mean,sim_mse_stderr,sim_mse_pooled,se_mse,runs", artifacts);
    for (const auto& c : result.curves) {
      for (int t = 0; t <= T; ++t) {
        out << result.manifest_hash << ',' << c.variant.scenario_name() << ',' << c.variant.denoiser_name() << ','
            << t + 1 << ',' << c.sim_mean[static_cast<std::size_t>(t)] << ',' << c.sim_stderr[static_cast<std::size_t>(t)]
            << ',' << c.sim_pooled[static_cast<std::size_t>(t)] << ',' << c.se_mse[static_cast<std::size_t>(t)] << ',' << c.sim_count[static_cast<std::size_t>(t)] << '\n';
      }
    }
    auto dec = open_csv(ctx, "decoupling.csv", "manifest_hash,scenario,denoiser_mode,residual_vs_se,empirical_c_vs_se",
                        artifacts);
    for (const auto& c : result.curves) {
      dec << result.manifest_hash << ',' << c.variant.scenario_name() << ',' << c.variant.denoiser_name() << ','
          << c.decoupling_error << ',' << c.empirical_c_error << '\n';
    }
  }
  diag.close();
  if (first) finish(ctx, experiment, cfg, *first, artifacts, start);
  return result;
}

// ---- Detection ---------------------------------------------------------------------------------

double RocResult::equal_error_sigma() const {
  const double pf = p_fa();
  const double pm = p_md();
  const double ni = static_cast<double>(std::max<Index>(operating.inactives, 1));
  const double na = static_cast<double>(std::max<Index>(operating.actives, 1));
  return 0.5 * std::sqrt(pf * (1.0 - pf) / ni + pm * (1.0 - pm) / na);
}

RocComparison run_roc(const ScenarioConfig& cfg, const ExperimentContext& ctx, const std::vector<Variant>& variants) {
  validate(cfg);
  const auto start = Clock::now();
  const std::string experiment = "roc";
  RocComparison result;
  result.manifest_hash = manifest_hash(cfg, experiment);
  const int R = cfg.runs;
  std::vector<std::string> artifacts;
  std::optional<Scenario> first;
  std::ofstream cal_csv;
  if (writing(ctx)) {
    cal_csv = open_csv(ctx, "calibration.csv", "manifest_hash,scenario,denoiser_mode,location,activity,tau_log,model_p_fa,model_p_md",
                       artifacts);
  }
  for (const auto& v : variants) {
    const Scenario sc = make_variant(cfg, v, ctx);
    note(ctx, "roc: " + v.label() + " state evolution and calibration");
    const SeTrace se = run_scenario_se(sc);
    const auto cal = calibrate_thresholds(sc, se.at(cfg.iterations));
    if (writing(ctx)) {
      for (std::size_t u = 0; u < cal.size(); ++u) {
        cal_csv << result.manifest_hash << ',' << v.scenario_name() << ',' << v.denoiser_name() << ',' << u << ','
                << sc.priors[u].activity << ',' << cal[u].log_tau << ',' << cal[u].p_fa << ',' << cal[u].p_md << '\n';
      }
    }
    note(ctx, "roc: " + v.label() + " " + std::to_string(R) + " AMP runs");
    std::vector<std::vector<LabeledScores>> per_run(static_cast<std::size_t>(R));
    parallel_for(R, [&](Index r) {
      const Slot slot = simulate_slot(sc, static_cast<std::uint64_t>(r));
      AmpTrace trace = run_amp(slot.signal.y, slot.codebooks, sc.priors, sc.noise.variance, amp_options(sc, &se, nullptr));
      auto& out = per_run[static_cast<std::size_t>(r)];
      for (std::size_t u = 0; u < trace.np_scores.size(); ++u) {
        out.push_back({std::move(trace.np_scores[u]), slot.truth.locations[u].active, cal[u].log_tau});
      }
    });
    std::vector<LabeledScores> data;
    for (auto& run : per_run) {
      for (auto& d : run) data.push_back(std::move(d));
    }
    RocResult rr;
    rr.variant = v;
    rr.runs = R;
    rr.curve = build_roc(data, roc_thresholds(data));
    rr.operating = operating_point(data);
    result.results.push_back(std::move(rr));
    if (!first) first = sc;
  }
  cal_csv.close();
  if (writing(ctx)) {
    auto out = open_csv(ctx, "roc.csv", "manifest_hash,scenario,denoiser_mode,tau_log,p_fa,p_md,n_trials", artifacts);
    for (const auto& r : result.results) {
      for (const auto& p : r.curve) {
        out << result.manifest_hash << ',' << r.variant.scenario_name() << ',' << r.variant.denoiser_name() << ','
            << p.log_tau << ',';
        put(out, p.p_fa());
        out << ',';
        put(out, p.p_md());
        out << ',' << r.runs << '\n';
      }
    }
    auto ee = open_csv(ctx, "roc_equal_error.csv",
                       "manifest_hash,scenario,denoiser_mode,p_fa,p_md,p_equal_error,sigma,n_active,n_inactive,n_trials",
                       artifacts);
    for (const auto& r : result.results) {
      ee << result.manifest_hash << ',' << r.variant.scenario_name() << ',' << r.variant.denoiser_name() << ','
         << r.p_fa() << ',' << r.p_md() << ',' << r.equal_error() << ',' << r.equal_error_sigma() << ','
         << r.operating.actives << ',' << r.operating.inactives << ',' << r.runs << '\n';
    }
  }
  if (first) finish(ctx, experiment, cfg, *first, artifacts, start);
  return result;
}

// ---- Positioning -------------------------------------------------------------------------------

namespace {

std::vector<double> cdf_error_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 240; ++i) g.push_back(0.06 * i / 240.0);
  return g;
}

}  // namespace

PositionCdfComparison run_position_cdf(const ScenarioConfig& cfg, const ExperimentContext& ctx,
                                       const std::vector<Variant>& variants) {
  validate(cfg);
  const auto start = Clock::now();
  const std::string experiment = "position-cdf";
  PositionCdfComparison result;
  result.manifest_hash = manifest_hash(cfg, experiment);
  const int R = cfg.runs;
  std::vector<std::string> artifacts;
  std::optional<Scenario> first;
  for (const auto& v : variants) {
    const Scenario sc = make_variant(cfg, v, ctx);
    note(ctx, "position-cdf: " + v.label() + " state evolution and calibration");
    const SeTrace se = run_scenario_se(sc);
    const auto cal = calibrate_thresholds(sc, se.at(cfg.iterations));
    note(ctx, "position-cdf: " + v.label() + " " + std::to_string(R) + " AMP runs");
    std::vector<std::vector<PositionEstimate>> per_run(static_cast<std::size_t>(R));
    parallel_for(R, [&](Index r) {
      const Slot slot = simulate_slot(sc, static_cast<std::uint64_t>(r));
      const AmpTrace trace =
          run_amp(slot.signal.y, slot.codebooks, sc.priors, sc.noise.variance, amp_options(sc, &se, nullptr));
      const auto outcome = detect(trace, slot.truth, cal);
      auto& out = per_run[static_cast<std::size_t>(r)];
      for (std::size_t u = 0; u < outcome.size(); ++u) {
        if (outcome[u].detected.empty()) continue;
        const Denoiser den(sc.priors[u], trace.final_covariance, denoiser_options(sc.config));
        for (Index n : outcome[u].detected) {
          out.push_back(estimate_position(den, sc.priors[u].grid, sc.geometry, trace.decoupled[u].row(n),
                                          truth_position(slot.truth.locations[u], n), static_cast<Index>(u), n));
        }
      }
    });
    PositionCdfResult pr;
    pr.variant = v;
    pr.runs = R;
    for (auto& run : per_run) pr.estimates.insert(pr.estimates.end(), run.begin(), run.end());
    pr.table = error_cdf(pr.estimates, cdf_error_grid());
    if (!pr.estimates.empty()) {
      std::vector<double> e;
      std::vector<double> o;
      for (const auto& x : pr.estimates) {
        e.push_back(x.error);
        o.push_back(x.oracle_error);
      }
      pr.ks = ks_distance(e, o);
      pr.median_error = median(e);
      pr.median_oracle_error = median(o);
    } else {
      note(ctx, "position-cdf: " + v.label() + " has no detected messages");
      pr.ks = std::numeric_limits<double>::quiet_NaN();
      pr.median_error = pr.median_oracle_error = std::numeric_limits<double>::quiet_NaN();
    }
    result.results.push_back(std::move(pr));
    if (!first) first = sc;
  }
  if (writing(ctx)) {
    auto out = open_csv(ctx, "position_cdf.csv", "manifest_hash,scenario,denoiser_mode,estimator,error_km,cdf,samples",
                        artifacts);
    for (const auto& r : result.results) {
      for (std::size_t i = 0; i < r.table.error_km.size(); ++i) {
        for (int k = 0; k < 2; ++k) {
          out << result.manifest_hash << ',' << r.variant.scenario_name() << ',' << r.variant.denoiser_name() << ','
              << (k == 0 ? "map" : "oracle") << ',' << r.table.error_km[i] << ','
              << (k == 0 ? r.table.map_cdf[i] : r.table.oracle_cdf[i]) << ',' << r.table.samples << '\n';
        }
      }
    }
    auto est = open_csv(ctx, "position_estimates.csv",
                        "manifest_hash,scenario,denoiser_mode,location,codeword,truth_x,truth_y,map_x,map_y,oracle_x,"
                        "oracle_y,error_km,oracle_error_km",
                        artifacts);
    for (const auto& r : result.results) {
      for (const auto& e : r.estimates) {
        est << result.manifest_hash << ',' << r.variant.scenario_name() << ',' << r.variant.denoiser_name() << ','
            << e.location << ',' << e.codeword << ',' << e.truth.x << ',' << e.truth.y << ',' << e.estimate.x << ','
            << e.estimate.y << ',' << e.oracle.x << ',' << e.oracle.y << ',' << e.error << ',' << e.oracle_error << '\n';
      }
    }
  }
  if (first) finish(ctx, experiment, cfg, *first, artifacts, start);
  return result;
}

PositionSnapshot run_position_snapshot(const ScenarioConfig& cfg, const ExperimentContext& ctx) {
  validate(cfg);
  const auto start = Clock::now();
  const std::string experiment = "position-snapshot";
  const Scenario sc = make_variant(cfg, kLbMatched, ctx);
  if (cfg.snapshot_location >= sc.num_locations()) throw ConfigError("snapshot_location out of range");
  const SeTrace se = run_scenario_se(sc);
  const auto cal = calibrate_thresholds(sc, se.at(cfg.iterations));

  PositionSnapshot snap;
  snap.manifest_hash = manifest_hash(cfg, experiment);
  bool found = false;
  // Prefer the requested location; fall back to any location of the same run.
  for (int r = 0; r < cfg.runs && !found; ++r) {
    const Slot slot = simulate_slot(sc, static_cast<std::uint64_t>(r));
    const AmpTrace trace =
        run_amp(slot.signal.y, slot.codebooks, sc.priors, sc.noise.variance, amp_options(sc, &se, nullptr));
    const auto outcome = detect(trace, slot.truth, cal);
    std::vector<Index> order{cfg.snapshot_location};
    for (Index u = 0; u < sc.num_locations(); ++u) {
      if (u != cfg.snapshot_location) order.push_back(u);
    }
    for (Index u : order) {
      if (outcome[static_cast<std::size_t>(u)].detected.empty()) continue;
      if (u != cfg.snapshot_location) note(ctx, "position-snapshot: no detection at the requested location; using " + std::to_string(u));
      const auto& prior = sc.priors[static_cast<std::size_t>(u)];
      const Index n = outcome[static_cast<std::size_t>(u)].detected.front();
      const Denoiser den(prior, trace.final_covariance, denoiser_options(sc.config));
      snap.location = u;
      snap.codeword = n;
      snap.run = r;
      snap.grid = prior.grid;
      snap.map_index = map_position(den, trace.decoupled[static_cast<std::size_t>(u)].row(n), &snap.objective);
      snap.estimate = prior.grid.points[static_cast<std::size_t>(snap.map_index)];
      snap.truth = truth_position(slot.truth.locations[static_cast<std::size_t>(u)], n);
      snap.tile_vertices = sc.geometry.tile(prior.support_tiles.front()).vertices;
      found = true;
      break;
    }
  }
  if (!found) throw ConfigError("no detected message in any run; increase runs or activity");

  if (writing(ctx)) {
    std::vector<std::string> artifacts;
    auto out = open_csv(ctx, "position_snapshot.csv", "manifest_hash,kind,index,x,y,objective", artifacts);
    const auto& torus = sc.geometry.torus();
    // Unwrap points next to the tile for plotting.
    const Point2D anchor = snap.tile_vertices[0];
    auto local = [&](Point2D p) { return anchor + torus.displacement(anchor, p); };
    for (Index q = 0; q < snap.grid.size(); ++q) {
      const Point2D p = local(snap.grid.points[static_cast<std::size_t>(q)]);
      out << snap.manifest_hash << ",grid," << q << ',' << p.x << ',' << p.y << ',' << snap.objective(q) << '\n';
    }
    const Point2D t = local(snap.truth);
    const Point2D e = local(snap.estimate);
    out << snap.manifest_hash << ",truth,0," << t.x << ',' << t.y << ",\n";
    out << snap.manifest_hash << ",estimate," << snap.map_index << ',' << e.x << ',' << e.y << ','
        << snap.objective(snap.map_index) << '\n';
    for (int k = 0; k < 3; ++k) {
      const Point2D v = snap.tile_vertices[static_cast<std::size_t>(k)];
      out << snap.manifest_hash << ",vertex," << k << ',' << v.x << ',' << v.y << ",\n";
    }
    finish(ctx, experiment, cfg, sc, artifacts, start);
  }
  return snap;
}

// ---- Channel estimation ------------------------------------------------------------------------

std::optional<double> ChannelMseSweep::find(double snr_rx_db, const std::string& estimator) const {
  for (const auto& p : points) {
    if (p.snr_rx_db == snr_rx_db && p.estimator == estimator) return p.mse;
  }
  return std::nullopt;
}

namespace {

// Per-location mean of (1/F)||eta(x + phi) - x||^2 over active draws that pass the threshold.
std::vector<std::optional<double>> se_detected_error(const Scenario& sc, const CMatrix& c,
                                                     const std::vector<Calibration>& cal) {
  const Index U = sc.num_locations();
  const Index F = sc.num_antennas();
  std::vector<std::optional<double>> out(static_cast<std::size_t>(U));
  Eigen::LLT<CMatrix> llt(0.5 * (c + c.adjoint()));
  if (llt.info() != Eigen::Success) throw NumericalError("SE covariance is not positive definite");
  const CMatrix factor_h = llt.matrixL().toDenseMatrix().adjoint();
  parallel_for(U, [&](Index u) {
    const auto& prior = sc.priors[static_cast<std::size_t>(u)];
    if (prior.activity <= 0.0) return;
    const Index n = sc.config.calibration_samples;
    Rng rng = substream(sc.config.seed, Stream::state_evolution, static_cast<std::uint64_t>(u), 1);
    const CMatrix x = sample_active_channels(prior, sc.geometry, n, rng);
    CMatrix z(n, F);
    fill_complex_normal(z, 1.0, rng);
    const Denoiser den(prior, c, denoiser_options(sc.config));
    const auto b = den.apply(x + z * factor_h, false);
    double sum = 0.0;
    Index kept = 0;
    for (Index i = 0; i < n; ++i) {
      if (b.np_scores(i) < cal[static_cast<std::size_t>(u)].log_tau) continue;
      sum += (b.estimates.row(i) - x.row(i)).squaredNorm() / static_cast<double>(F);
      ++kept;
    }
    if (kept > 0) out[static_cast<std::size_t>(u)] = sum / static_cast<double>(kept);
  });
  return out;
}

}  // namespace

ChannelMseSweep run_channel_mse_sweep(const ScenarioConfig& cfg, const ExperimentContext& ctx) {
  validate(cfg);
  const auto start = Clock::now();
  const std::string experiment = "channel-mse";
  ChannelMseSweep result;
  result.manifest_hash = manifest_hash(cfg, experiment);
  const int R = cfg.runs;
  std::optional<Scenario> first;

  for (double snr : cfg.snr_sweep_db) {
    ScenarioConfig c = cfg;
    c.snr_rx_db = snr;
    const Scenario matched = make_variant(c, kLbMatched, ctx);
    const Scenario mismatched = make_variant(c, kLbMismatched, ctx);
    if (!first) first = matched;
    note(ctx, "channel-mse: SNR_rx " + std::to_string(snr) + " dB, state evolution and calibration");
    const SeTrace se_m = run_scenario_se(matched);
    const SeTrace se_x = run_scenario_se(mismatched);
    const CMatrix& c_m = se_m.at(cfg.iterations);
    const CMatrix& c_x = se_x.at(cfg.iterations);
    const auto cal_m = calibrate_thresholds(matched, c_m);
    const auto cal_x = calibrate_thresholds(mismatched, c_x);

    const Index U = matched.num_locations();
    struct RunErrors {
      std::vector<std::vector<double>> amp_m, amp_x, genie;
      std::vector<std::vector<Index>> detected_m;
    };
    std::vector<RunErrors> runs(static_cast<std::size_t>(R));
    note(ctx, "channel-mse: SNR_rx " + std::to_string(snr) + " dB, " + std::to_string(R) + " runs");
    parallel_for(R, [&](Index r) {
      // Matched and mismatched decoders see the same slot; only the decoder grid differs.
      const Slot slot = simulate_slot(matched, static_cast<std::uint64_t>(r));
      const Index F = slot.signal.y.cols();
      RunErrors& e = runs[static_cast<std::size_t>(r)];
      e.amp_m.resize(static_cast<std::size_t>(U));
      e.amp_x.resize(static_cast<std::size_t>(U));
      e.genie.resize(static_cast<std::size_t>(U));
      auto amp_errors = [&](const Scenario& sc, const SeTrace& se, const std::vector<Calibration>& cal,
                            std::vector<std::vector<double>>& dst, std::vector<std::vector<Index>>* detected) {
        const AmpTrace trace =
            run_amp(slot.signal.y, slot.codebooks, sc.priors, sc.noise.variance, amp_options(sc, &se, nullptr));
        const auto outcome = detect(trace, slot.truth, cal);
        if (detected) detected->resize(outcome.size());
        for (std::size_t u = 0; u < outcome.size(); ++u) {
          for (Index n : outcome[u].detected) {
            dst[u].push_back((trace.estimates[u].row(n) - slot.truth.locations[u].channels.row(n)).squaredNorm() /
                             static_cast<double>(F));
          }
          if (detected) (*detected)[u] = outcome[u].detected;
        }
      };
      amp_errors(matched, se_m, cal_m, e.amp_m, &e.detected_m);
      amp_errors(mismatched, se_x, cal_x, e.amp_x, nullptr);
      const GenieContext genie(slot.codebooks, slot.truth, matched.geometry, matched.noise.variance);
      for (Index u = 0; u < U; ++u) {
        for (Index n : e.detected_m[static_cast<std::size_t>(u)]) {
          e.genie[static_cast<std::size_t>(u)].push_back(genie.analytic_component_mse(*genie.find(u, n)));
        }
      }
    });

    // Pool runs per location.
    std::vector<std::vector<double>> amp_m(static_cast<std::size_t>(U)), amp_x(static_cast<std::size_t>(U)),
        gen(static_cast<std::size_t>(U));
    for (const auto& e : runs) {
      for (Index u = 0; u < U; ++u) {
        const auto k = static_cast<std::size_t>(u);
        amp_m[k].insert(amp_m[k].end(), e.amp_m[k].begin(), e.amp_m[k].end());
        amp_x[k].insert(amp_x[k].end(), e.amp_x[k].begin(), e.amp_x[k].end());
        gen[k].insert(gen[k].end(), e.genie[k].begin(), e.genie[k].end());
      }
    }
    auto count = [](const std::vector<std::vector<double>>& v) {
      std::pair<Index, Index> mc{0, 0};
      for (const auto& x : v) {
        mc.first += static_cast<Index>(x.size());
        mc.second += x.empty() ? 0 : 1;
      }
      return mc;
    };
    auto push = [&](const std::string& name, const std::vector<std::vector<double>>& v) {
      const auto [m, l] = count(v);
      result.points.push_back({snr, name, aggregate_mse(v), m, l, R});
    };
    push("genie", gen);
    push("amp_matched", amp_m);
    push("amp_mismatched", amp_x);

    // SE prediction over the locations that enter the matched AMP aggregate.
    const auto se_err = se_detected_error(matched, c_m, cal_m);
    std::vector<std::vector<double>> se_v(static_cast<std::size_t>(U));
    for (Index u = 0; u < U; ++u) {
      const auto k = static_cast<std::size_t>(u);
      if (!amp_m[k].empty() && se_err[k]) se_v[k].push_back(*se_err[k]);
    }
    push("se_prediction", se_v);

    // Genie analytic vs Monte Carlo on the first run with a detection.
    for (int r = 0; r < R; ++r) {
      const auto& det = runs[static_cast<std::size_t>(r)].detected_m;
      bool any = false;
      for (const auto& d : det) any = any || !d.empty();
      if (!any) continue;
      const Slot slot = simulate_slot(matched, static_cast<std::uint64_t>(r));
      const GenieContext genie(slot.codebooks, slot.truth, matched.geometry, matched.noise.variance);
      Rng rng = substream(cfg.seed, Stream::genie, static_cast<std::uint64_t>(r));
      result.genie_checks.push_back(
          {snr, genie_monte_carlo(genie, slot.truth, matched.geometry, matched.noise.variance, det, cfg.genie_mc_draws, rng)});
      break;
    }
  }

  if (writing(ctx)) {
    std::vector<std::string> artifacts;
    auto out = open_csv(ctx, "channel_mse.csv", "manifest_hash,snr_rx_db,estimator,mse,runs,messages,locations", artifacts);
    for (const auto& p : result.points) {
      out << result.manifest_hash << ',' << p.snr_rx_db << ',' << p.estimator << ',';
      put(out, p.mse);
      out << ',' << p.runs << ',' << p.messages << ',' << p.locations << '\n';
    }
    auto g = open_csv(ctx, "genie_check.csv", "manifest_hash,snr_rx_db,analytic,empirical,std_error,draws", artifacts);
    for (const auto& c : result.genie_checks) {
      g << result.manifest_hash << ',' << c.snr_rx_db << ',' << c.mc.analytic << ',' << c.mc.empirical << ','
        << c.mc.std_error << ',' << c.mc.draws << '\n';
    }
    if (first) finish(ctx, experiment, cfg, *first, artifacts, start);
  }
  return result;
}

}  // namespace cfura
