#include "cfura/genie_mmse.hpp"

#include <cmath>

namespace cfura {

GenieContext::GenieContext(const std::vector<CMatrix>& codebooks, const GroundTruth& truth, const NetworkGeometry& g,
                           double noise_variance)
    : m_(g.antennas_per_ru()) {
  if (codebooks.size() != truth.locations.size()) throw ConfigError("codebook/truth location count mismatch");
  if (codebooks.empty()) throw ConfigError("no locations");
  if (!(noise_variance >= 0.0)) throw ConfigError("noise variance must be >= 0");
  const Index L = codebooks.front().rows();
  const Index B = g.num_rus();
  for (std::size_t u = 0; u < truth.locations.size(); ++u) {
    for (Index n : truth.locations[u].active) members_.emplace_back(static_cast<Index>(u), n);
  }
  const Index A = num_active();
  s_active_.resize(L, A);
  gains_.resize(A, B);
  {
    Index k = 0;
    for (std::size_t u = 0; u < truth.locations.size(); ++u) {
      const auto& lt = truth.locations[u];
      for (std::size_t i = 0; i < lt.active.size(); ++i, ++k) {
        s_active_.col(k) = codebooks[u].col(lt.active[i]);
        for (Index b = 0; b < B; ++b) gains_(k, b) = g.pathloss(b, lt.positions[i]);
      }
    }
  }
  mse_.resize(A, B);
  for (Index b = 0; b < B; ++b) {
    CMatrix sigma = s_active_ * gains_.col(b).cast<Complex>().asDiagonal() * s_active_.adjoint();
    sigma.diagonal().array() += noise_variance;
    sigma = 0.5 * (sigma + sigma.adjoint()).eval();
    Eigen::LLT<CMatrix> llt(sigma);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      const auto d = llt.matrixLLT().diagonal().real();
      ok = d.allFinite() && d.minCoeff() > 1e-150 && d.minCoeff() > 1e-10 * d.maxCoeff();
    }
    if (!ok) throw NumericalError("genie covariance of RU " + std::to_string(b) + " is singular");
    solved_.push_back(llt.solve(s_active_));
    for (Index k = 0; k < A; ++k) {
      const double gam = gains_(k, b);
      const double quad = s_active_.col(k).dot(solved_.back().col(k)).real();
      mse_(k, b) = std::max(0.0, gam - gam * gam * quad);
    }
    sigma_.push_back(std::move(sigma));
  }
}

std::optional<Index> GenieContext::find(Index u, Index n) const {
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (members_[k].first == u && members_[k].second == n) return static_cast<Index>(k);
  }
  return std::nullopt;
}

Index GenieContext::index_or_throw(Index u, Index n) const {
  const auto k = find(u, n);
  if (!k) throw ConfigError("message (" + std::to_string(u) + ", " + std::to_string(n) + ") is not active");
  return *k;
}

CMatrix GenieContext::estimate_all(const CMatrix& y) const {
  const Index B = static_cast<Index>(solved_.size());
  if (y.rows() != s_active_.rows() || y.cols() != B * m_) throw ConfigError("received signal has the wrong shape");
  CMatrix est(num_active(), y.cols());
  for (Index b = 0; b < B; ++b) {
    est.middleCols(b * m_, m_) =
        gains_.col(b).cast<Complex>().asDiagonal() * (solved_[static_cast<std::size_t>(b)].adjoint() * y.middleCols(b * m_, m_));
  }
  return est;
}

CRow GenieContext::estimate_channel(Index u, Index n, const CMatrix& y) const {
  const Index k = index_or_throw(u, n);
  const Index B = static_cast<Index>(solved_.size());
  if (y.rows() != s_active_.rows() || y.cols() != B * m_) throw ConfigError("received signal has the wrong shape");
  CRow h(y.cols());
  for (Index b = 0; b < B; ++b) {
    h.segment(b * m_, m_) = gains_(k, b) * (solved_[static_cast<std::size_t>(b)].col(k).adjoint() * y.middleCols(b * m_, m_));
  }
  return h;
}

double GenieContext::analytic_mse(Index u, Index n, Index b) const { return mse_(index_or_throw(u, n), b); }

double GenieContext::analytic_component_mse(Index k) const { return mse_.row(k).mean(); }

std::optional<double> aggregate_mse(const std::vector<std::vector<double>>& per_location) {
  double acc = 0.0;
  Index included = 0;
  for (const auto& v : per_location) {
    if (v.empty()) continue;
    double s = 0.0;
    for (double x : v) s += x;
    acc += s / static_cast<double>(v.size());
    ++included;
  }
  if (included == 0) return std::nullopt;
  return acc / static_cast<double>(included);
}

GenieMonteCarlo genie_monte_carlo(const GenieContext& ctx, const GroundTruth& truth, const NetworkGeometry& g,
                                  double noise_variance, const std::vector<std::vector<Index>>& selected, Index draws,
                                  Rng& rng) {
  if (draws < 2) throw ConfigError("genie Monte Carlo needs at least 2 draws");
  if (selected.size() != truth.locations.size()) throw ConfigError("selection/truth location count mismatch");
  std::vector<std::vector<Index>> members(selected.size());
  std::vector<std::vector<double>> analytic(selected.size());
  for (std::size_t u = 0; u < selected.size(); ++u) {
    for (Index n : selected[u]) {
      const auto k = ctx.find(static_cast<Index>(u), n);
      if (!k) throw ConfigError("selected message is not active");
      members[u].push_back(*k);
      analytic[u].push_back(ctx.analytic_component_mse(*k));
    }
  }
  GenieMonteCarlo out;
  out.draws = draws;
  const auto a = aggregate_mse(analytic);
  if (!a) throw ConfigError("genie Monte Carlo needs a non-empty selection");
  out.analytic = *a;

  const Index A = ctx.num_active();
  const Index F = g.num_antennas();
  std::vector<RVector> profiles;
  profiles.reserve(static_cast<std::size_t>(A));
  for (const auto& lt : truth.locations) {
    for (const auto& p : lt.positions) profiles.push_back(g.covariance_profile(p));
  }
  double sum = 0.0;
  double sum2 = 0.0;
  CMatrix h(A, F);
  CMatrix w(ctx.active_codewords().rows(), F);
  std::vector<std::vector<double>> err(selected.size());
  for (Index d = 0; d < draws; ++d) {
    for (Index k = 0; k < A; ++k) {
      for (Index f = 0; f < F; ++f) h(k, f) = rng.complex_normal(profiles[static_cast<std::size_t>(k)](f));
    }
    fill_complex_normal(w, noise_variance, rng);
    const CMatrix y = ctx.active_codewords() * h + w;
    const CMatrix est = ctx.estimate_all(y);
    for (std::size_t u = 0; u < members.size(); ++u) {
      err[u].clear();
      for (Index k : members[u]) err[u].push_back((est.row(k) - h.row(k)).squaredNorm() / static_cast<double>(F));
    }
    const double v = *aggregate_mse(err);
    sum += v;
    sum2 += v * v;
  }
  const double nd = static_cast<double>(draws);
  out.empirical = sum / nd;
  const double var = std::max(0.0, (sum2 - nd * out.empirical * out.empirical) / (nd - 1.0));
  out.std_error = std::sqrt(var / nd);
  return out;
}

}  // namespace cfura
