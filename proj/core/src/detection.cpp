#include "cfura/detection.hpp"

#include <algorithm>
#include <cmath>

#include "cfura/airlink.hpp"

namespace cfura {

DetectionOutcome classify(const RVector& scores, double log_tau, const std::vector<Index>& active) {
  if (std::isnan(log_tau)) throw ConfigError("detection threshold is NaN");
  DetectionOutcome out;
  out.codewords = scores.size();
  std::size_t k = 0;
  for (Index n = 0; n < scores.size(); ++n) {
    while (k < active.size() && active[k] < n) ++k;
    const bool is_active = k < active.size() && active[k] == n;
    const bool declared = scores(n) >= log_tau;
    if (declared) out.declared.push_back(n);
    if (declared && is_active) out.detected.push_back(n);
    if (declared && !is_active) out.false_alarm.push_back(n);
    if (!declared && is_active) out.missed.push_back(n);
  }
  return out;
}

std::optional<double> RocPoint::p_fa() const {
  if (inactives == 0) return std::nullopt;
  return static_cast<double>(false_alarms) / static_cast<double>(inactives);
}

std::optional<double> RocPoint::p_md() const {
  if (actives == 0) return std::nullopt;
  return static_cast<double>(missed) / static_cast<double>(actives);
}

namespace {

struct SplitScores {
  std::vector<double> active;
  std::vector<double> inactive;
};

SplitScores split(const LabeledScores& d) {
  SplitScores s;
  std::size_t k = 0;
  for (Index n = 0; n < d.scores.size(); ++n) {
    while (k < d.active.size() && d.active[k] < n) ++k;
    if (k < d.active.size() && d.active[k] == n) {
      s.active.push_back(d.scores(n));
    } else {
      s.inactive.push_back(d.scores(n));
    }
  }
  return s;
}

// Number of entries of the sorted vector that are >= tau.
Index count_at_least(const std::vector<double>& sorted, double tau) {
  return static_cast<Index>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), tau));
}

}  // namespace

std::vector<RocPoint> build_roc(const std::vector<LabeledScores>& data, std::vector<double> log_taus) {
  std::sort(log_taus.begin(), log_taus.end());
  SplitScores all;
  for (const auto& d : data) {
    auto s = split(d);
    all.active.insert(all.active.end(), s.active.begin(), s.active.end());
    all.inactive.insert(all.inactive.end(), s.inactive.begin(), s.inactive.end());
  }
  std::sort(all.active.begin(), all.active.end());
  std::sort(all.inactive.begin(), all.inactive.end());
  std::vector<RocPoint> roc;
  roc.reserve(log_taus.size());
  for (double tau : log_taus) {
    RocPoint p;
    p.log_tau = tau;
    p.actives = static_cast<Index>(all.active.size());
    p.inactives = static_cast<Index>(all.inactive.size());
    p.false_alarms = count_at_least(all.inactive, tau);
    p.missed = p.actives - count_at_least(all.active, tau);
    roc.push_back(p);
  }
  return roc;
}

RocPoint operating_point(const std::vector<LabeledScores>& data) {
  RocPoint p;
  p.log_tau = std::nan("");
  for (const auto& d : data) {
    const auto o = classify(d.scores, d.log_tau, d.active);
    p.false_alarms += static_cast<Index>(o.false_alarm.size());
    p.missed += static_cast<Index>(o.missed.size());
    p.actives += o.actives();
    p.inactives += o.inactives();
  }
  return p;
}

double equal_error_threshold(const std::vector<double>& inactive, const std::vector<double>& active) {
  if (inactive.empty() || active.empty()) throw ConfigError("equal-error threshold needs both classes");
  std::vector<double> a = active;
  std::vector<double> i = inactive;
  std::sort(a.begin(), a.end());
  std::sort(i.begin(), i.end());
  const double na = static_cast<double>(a.size());
  const double ni = static_cast<double>(i.size());
  // P_FA - P_MD, non-increasing in tau.
  auto gap = [&](double tau) {
    const double pfa = static_cast<double>(count_at_least(i, tau)) / ni;
    const double pmd = 1.0 - static_cast<double>(count_at_least(a, tau)) / na;
    return pfa - pmd;
  };
  double lo = std::min(a.front(), i.front());
  double hi = std::max(a.back(), i.back());
  hi += 1.0 + std::abs(hi) * 1e-12;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double g = gap(mid);
    if (std::abs(g) <= 1e-3) return mid;
    if (g > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    // No sample strictly between lo and hi: the gap cannot change further.
    const auto in_open = [&](const std::vector<double>& v) {
      auto it = std::upper_bound(v.begin(), v.end(), lo);
      return it != v.end() && *it < hi;
    };
    if (!in_open(a) && !in_open(i)) break;
  }
  return std::abs(gap(lo)) <= std::abs(gap(hi)) ? lo : hi;
}

Calibration calibrate_equal_error(const Denoiser& denoiser, const LocationPrior& prior, const NetworkGeometry& g,
                                  const CMatrix& c, Index samples, Rng& rng) {
  if (prior.activity <= 0.0 || prior.activity >= 1.0) {
    throw ConfigError("equal-error calibration is undefined for activity 0 or 1");
  }
  if (samples < 1) throw ConfigError("calibration_samples must be >= 1");
  const Index F = g.num_antennas();
  Eigen::LLT<CMatrix> llt(0.5 * (c + c.adjoint()));
  if (llt.info() != Eigen::Success) throw NumericalError("calibration covariance is not positive definite");
  const CMatrix factor_h = llt.matrixL().toDenseMatrix().adjoint();

  const CMatrix x = sample_active_channels(prior, g, samples, rng);
  CMatrix za(samples, F);
  fill_complex_normal(za, 1.0, rng);
  CMatrix zi(samples, F);
  fill_complex_normal(zi, 1.0, rng);
  const RVector sa = denoiser.apply(x + za * factor_h, false).np_scores;
  const RVector si = denoiser.apply(zi * factor_h, false).np_scores;
  const std::vector<double> va(sa.data(), sa.data() + sa.size());
  const std::vector<double> vi(si.data(), si.data() + si.size());

  Calibration cal;
  cal.log_tau = equal_error_threshold(vi, va);
  cal.p_fa = static_cast<double>((si.array() >= cal.log_tau).count()) / static_cast<double>(samples);
  cal.p_md = static_cast<double>((sa.array() < cal.log_tau).count()) / static_cast<double>(samples);
  return cal;
}

}  // namespace cfura
