#include "cfura/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfura {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_det_from_llt(const Eigen::LLT<CMatrix>& llt) {
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i).real());
  return 2.0 * s;
}

// 1 / (1 + exp(l))
double inv_one_plus_exp(double l) {
  if (l > 0.0) {
    const double e = std::exp(-l);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(l));
}

RVector quad_columns(const CMatrix& x, const CMatrix& w) {
  return (x.conjugate().cwiseProduct(w)).colwise().sum().real().transpose();
}

}  // namespace

double log_sum_exp(const RVector& v) {
  if (v.size() == 0) return -kInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Denoiser::Denoiser(const LocationPrior& prior, const CMatrix& noise_cov, DenoiserOptions options,
                   std::optional<int> iteration)
    : dim_(noise_cov.rows()), activity_(prior.activity), options_(options) {
  if (noise_cov.rows() != noise_cov.cols()) throw ConfigError("noise covariance must be square");
  if (prior.grid.points.empty() || prior.profiles.size() != prior.grid.points.size()) {
    throw ConfigError("location prior needs a non-empty grid with one profile per point");
  }
  if (!noise_cov.allFinite()) throw NumericalError("effective noise covariance is not finite", iteration);
  const CMatrix c = 0.5 * (noise_cov + noise_cov.adjoint());
  noise_llt_.compute(c);
  if (noise_llt_.info() != Eigen::Success) {
    throw NumericalError("effective noise covariance is not positive definite", iteration);
  }
  log_det_noise_ = log_det_from_llt(noise_llt_);
  noise_inv_ = noise_llt_.solve(CMatrix::Identity(dim_, dim_));

  RVector row_abs = c.cwiseAbs().rowwise().sum();
  grid_.reserve(prior.profiles.size());
  for (std::size_t q = 0; q < prior.profiles.size(); ++q) {
    const RVector& sigma = prior.profiles[q];
    if (sigma.size() != dim_) throw ConfigError("profile length does not match covariance dimension");
    GridTerm t;
    t.sigma = sigma;
    CMatrix k = c;
    k.diagonal() += sigma.cast<Complex>();
    t.llt.compute(k);
    if (t.llt.info() != Eigen::Success) {
      throw NumericalError("Sigma(q) + C is not positive definite", iteration);
    }
    t.log_det = log_det_from_llt(t.llt);
    t.inv = t.llt.solve(CMatrix::Identity(dim_, dim_));
    t.gain = t.inv * sigma.cast<Complex>().asDiagonal();
    const double w = prior.grid.weights[q];
    t.log_weight = w > 0.0 ? std::log(w) : -kInf;
    t.bound_inv = (sigma + row_abs).cwiseInverse();
    grid_.push_back(std::move(t));
  }
}

double Denoiser::log_prior_ratio() const {
  if (activity_ <= 0.0) return kInf;
  if (activity_ >= 1.0) return -kInf;
  return std::log1p(-activity_) - std::log(activity_);
}

double Denoiser::quad_noise(const CRow& r) const {
  CVector x = r.adjoint();
  noise_llt_.matrixL().solveInPlace(x);
  return x.squaredNorm();
}

double Denoiser::quad_sum(const CRow& r, Index q) const {
  CVector x = r.adjoint();
  grid_[static_cast<std::size_t>(q)].llt.matrixL().solveInPlace(x);
  return x.squaredNorm();
}

CRow Denoiser::conditional_mean(const CRow& r, Index q) const { return r * gain(q); }

double Denoiser::map_log_ratio(const CRow& r, Index q) const {
  const double prior = log_prior_ratio();
  if (std::isinf(prior)) return prior;
  return prior + log_det_sum(q) - log_det_noise_ - (quad_noise(r) - quad_sum(r, q));
}

RVector Denoiser::active_log_terms(const CRow& r) const {
  RVector a(grid_size());
  for (Index q = 0; q < grid_size(); ++q) {
    const auto& t = grid_[static_cast<std::size_t>(q)];
    a(q) = std::isfinite(t.log_weight) ? t.log_weight - t.log_det - quad_sum(r, q) : -kInf;
  }
  return a;
}

double Denoiser::inactive_log_term(const CRow& r) const { return -log_det_noise_ - quad_noise(r); }

double Denoiser::np_log_ratio(const CRow& r) const { return log_sum_exp(active_log_terms(r)) - inactive_log_term(r); }

RVector Denoiser::position_objective(const CRow& r) const { return active_log_terms(r); }

RVector Denoiser::active_posterior(const CRow& r) const {
  RVector p = RVector::Zero(grid_size());
  if (activity_ <= 0.0) return p;
  const RVector a = active_log_terms(r);
  const double lw0 = activity_ < 1.0 ? std::log1p(-activity_) + inactive_log_term(r) : -kInf;
  const RVector lw = a.array() + std::log(activity_);
  const double m = std::max(lw0, lw.maxCoeff());
  const RVector e = (lw.array() - m).exp();
  const double z = e.sum() + (std::isfinite(lw0) ? std::exp(lw0 - m) : 0.0);
  return e / z;
}

CRow Denoiser::posterior_mean(const CRow& r) const {
  CRow eta = CRow::Zero(dim_);
  if (activity_ <= 0.0) return eta;
  if (options_.mixture == MixtureWeights::posterior) {
    const RVector pi = active_posterior(r);
    for (Index q = 0; q < grid_size(); ++q) {
      if (pi(q) > 0.0) eta += pi(q) * conditional_mean(r, q);
    }
    return eta;
  }
  for (Index q = 0; q < grid_size(); ++q) {
    const auto& t = grid_[static_cast<std::size_t>(q)];
    if (!std::isfinite(t.log_weight)) continue;
    eta += std::exp(t.log_weight) * inv_one_plus_exp(map_log_ratio(r, q)) * conditional_mean(r, q);
  }
  return eta;
}

CMatrix Denoiser::jacobian(const CRow& r) const {
  CMatrix j = CMatrix::Zero(dim_, dim_);
  if (activity_ <= 0.0) return j;
  const CVector rh = r.adjoint();
  const CVector v0 = noise_llt_.solve(rh);
  if (options_.mixture == MixtureWeights::posterior) {
    const RVector pi = active_posterior(r);
    const double pi0 = std::max(0.0, 1.0 - pi.sum());
    std::vector<CVector> v(static_cast<std::size_t>(grid_size()));
    CVector vbar = pi0 * v0;
    for (Index q = 0; q < grid_size(); ++q) {
      v[static_cast<std::size_t>(q)] = grid_[static_cast<std::size_t>(q)].llt.solve(rh);
      vbar += pi(q) * v[static_cast<std::size_t>(q)];
    }
    for (Index q = 0; q < grid_size(); ++q) {
      if (pi(q) == 0.0) continue;
      j += pi(q) * (gain(q) + (vbar - v[static_cast<std::size_t>(q)]) * conditional_mean(r, q));
    }
    return j;
  }
  for (Index q = 0; q < grid_size(); ++q) {
    const auto& t = grid_[static_cast<std::size_t>(q)];
    if (!std::isfinite(t.log_weight)) continue;
    const double w = inv_one_plus_exp(map_log_ratio(r, q));
    const CVector vq = t.llt.solve(rh);
    j += std::exp(t.log_weight) * (w * gain(q) + (w * (1.0 - w)) * (v0 - vq) * conditional_mean(r, q));
  }
  return j;
}

Denoiser::Batch Denoiser::apply(const CMatrix& rows, bool with_jacobian) const {
  if (rows.cols() != dim_) throw ConfigError("row dimension does not match denoiser dimension");
  return options_.mixture == MixtureWeights::posterior ? apply_posterior(rows, with_jacobian)
                                                       : apply_prior_weighted(rows, with_jacobian);
}

Denoiser::Batch Denoiser::apply_posterior(const CMatrix& rows, bool with_jacobian) const {
  const Index n = rows.rows();
  const Index Q = grid_size();
  Batch out;
  out.estimates = CMatrix::Zero(n, dim_);
  out.np_scores.resize(n);
  if (with_jacobian) out.jacobian_sum = CMatrix::Zero(dim_, dim_);

  const bool active_possible = activity_ > 0.0;
  const double log_act = active_possible ? std::log(activity_) : -kInf;
  const double log_inact = activity_ < 1.0 ? std::log1p(-activity_) : -kInf;

  RMatrix bound(dim_, Q);
  RVector offset(Q);
  for (Index q = 0; q < Q; ++q) {
    const auto& t = grid_[static_cast<std::size_t>(q)];
    bound.col(q) = t.bound_inv;
    offset(q) = t.log_weight - t.log_det;
  }

  struct Chunk {
    Index q;
    std::vector<Index> cols;
    CMatrix w;
    RVector a;
  };

  RVector mass = RVector::Zero(Q);
  const Index block = std::max<Index>(1, options_.block_rows);
  for (Index start = 0; start < n; start += block) {
    const Index nb = std::min(block, n - start);
    const CMatrix x = rows.middleRows(start, nb).adjoint();  // column i is r_i^H
    const CMatrix w0 = noise_inv_ * x;
    const RVector a0 = -log_det_noise_ - quad_columns(x, w0).array();

    const RMatrix abs2 = x.cwiseAbs2();  // F x nb
    // Upper bound on each active log term; row-major access per column i.
    const RMatrix ub = (-(bound.transpose() * abs2)).colwise() + offset;  // Q x nb

    std::vector<Index> best(static_cast<std::size_t>(nb));
    for (Index i = 0; i < nb; ++i) ub.col(i).maxCoeff(&best[static_cast<std::size_t>(i)]);

    std::vector<Chunk> chunks;
    RVector ref = RVector::Constant(nb, -kInf);
    auto evaluate = [&](Index q, std::vector<Index> cols) {
      if (cols.empty()) return;
      Chunk c{q, std::move(cols), {}, {}};
      const CMatrix xs = x(Eigen::all, c.cols);
      c.w = grid_[static_cast<std::size_t>(q)].inv * xs;
      c.a = offset(q) - quad_columns(xs, c.w).array();
      chunks.push_back(std::move(c));
    };

    std::vector<std::vector<Index>> groups(static_cast<std::size_t>(Q));
    for (Index i = 0; i < nb; ++i) groups[static_cast<std::size_t>(best[static_cast<std::size_t>(i)])].push_back(i);
    for (Index q = 0; q < Q; ++q) {
      if (std::isfinite(offset(q))) evaluate(q, std::move(groups[static_cast<std::size_t>(q)]));
    }
    for (const auto& c : chunks) {
      for (std::size_t k = 0; k < c.cols.size(); ++k) ref(c.cols[k]) = c.a(static_cast<Index>(k));
    }
    const std::size_t first_pass = chunks.size();
    for (Index q = 0; q < Q; ++q) {
      if (!std::isfinite(offset(q))) continue;
      std::vector<Index> cols;
      for (Index i = 0; i < nb; ++i) {
        if (best[static_cast<std::size_t>(i)] != q && ub(q, i) >= ref(i) - options_.prune_margin) cols.push_back(i);
      }
      evaluate(q, std::move(cols));
    }
    (void)first_pass;

    // Per-row normalizers over the exactly evaluated active terms.
    RVector amax = RVector::Constant(nb, -kInf);
    for (const auto& c : chunks) {
      for (std::size_t k = 0; k < c.cols.size(); ++k) amax(c.cols[k]) = std::max(amax(c.cols[k]), c.a(static_cast<Index>(k)));
    }
    RVector asum = RVector::Zero(nb);
    for (const auto& c : chunks) {
      for (std::size_t k = 0; k < c.cols.size(); ++k) asum(c.cols[k]) += std::exp(c.a(static_cast<Index>(k)) - amax(c.cols[k]));
    }
    const RVector log_active = amax.array() + asum.array().log();
    out.np_scores.segment(start, nb) = log_active - a0;

    if (!active_possible) continue;

    // Joint posterior: pi_q = lambda e^{a_q} / (lambda sum e^{a} + (1 - lambda) e^{a_0}).
    RVector lw_active = log_act + log_active.array();
    RVector lw0 = log_inact + a0.array();
    RVector mx = lw_active.cwiseMax(lw0);
    RVector denom_log(nb);
    for (Index i = 0; i < nb; ++i) {
      const double e0 = std::isfinite(lw0(i)) ? std::exp(lw0(i) - mx(i)) : 0.0;
      denom_log(i) = mx(i) + std::log(std::exp(lw_active(i) - mx(i)) + e0);
    }
    RVector pi0(nb);
    for (Index i = 0; i < nb; ++i) pi0(i) = std::isfinite(lw0(i)) ? std::exp(lw0(i) - denom_log(i)) : 0.0;

    std::vector<RVector> pis;
    pis.reserve(chunks.size());
    CMatrix vbar;
    if (with_jacobian) vbar = w0 * pi0.cast<Complex>().asDiagonal();
    for (const auto& c : chunks) {
      RVector pi(static_cast<Index>(c.cols.size()));
      const auto& sigma = grid_[static_cast<std::size_t>(c.q)].sigma;
      for (std::size_t k = 0; k < c.cols.size(); ++k) {
        const Index i = c.cols[k];
        pi(static_cast<Index>(k)) = std::exp(log_act + c.a(static_cast<Index>(k)) - denom_log(i));
        const double p = pi(static_cast<Index>(k));
        if (p == 0.0) continue;
        out.estimates.row(start + i) += p * (c.w.col(static_cast<Index>(k)).conjugate().cwiseProduct(sigma.cast<Complex>())).transpose();
        if (with_jacobian) vbar.col(i) += p * c.w.col(static_cast<Index>(k));
      }
      mass(c.q) += pi.sum();
      pis.push_back(std::move(pi));
    }
    if (with_jacobian) {
      for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
        const auto& c = chunks[ci];
        const auto& sigma = grid_[static_cast<std::size_t>(c.q)].sigma;
        const CMatrix d = vbar(Eigen::all, c.cols) - c.w;
        const CMatrix mt = sigma.cast<Complex>().asDiagonal() * c.w.conjugate();
        out.jacobian_sum.noalias() += d * pis[ci].cast<Complex>().asDiagonal() * mt.transpose();
      }
    }
  }
  if (with_jacobian && active_possible) {
    for (Index q = 0; q < Q; ++q) {
      if (mass(q) > 0.0) out.jacobian_sum += mass(q) * gain(q);
    }
  }
  return out;
}

Denoiser::Batch Denoiser::apply_prior_weighted(const CMatrix& rows, bool with_jacobian) const {
  const Index n = rows.rows();
  const Index Q = grid_size();
  Batch out;
  out.estimates = CMatrix::Zero(n, dim_);
  out.np_scores.resize(n);
  if (with_jacobian) out.jacobian_sum = CMatrix::Zero(dim_, dim_);
  const double prior = log_prior_ratio();
  const Index block = std::max<Index>(1, options_.block_rows);
  for (Index start = 0; start < n; start += block) {
    const Index nb = std::min(block, n - start);
    const CMatrix x = rows.middleRows(start, nb).adjoint();
    const CMatrix w0 = noise_inv_ * x;
    const RVector quad0 = quad_columns(x, w0);
    const RVector a0 = -log_det_noise_ - quad0.array();
    RMatrix a = RMatrix::Constant(Q, nb, -kInf);
    for (Index q = 0; q < Q; ++q) {
      const auto& t = grid_[static_cast<std::size_t>(q)];
      if (!std::isfinite(t.log_weight)) continue;
      const CMatrix w = t.inv * x;
      const RVector quad = quad_columns(x, w);
      a.row(q) = (t.log_weight - t.log_det - quad.array()).transpose();
      if (activity_ <= 0.0) continue;
      const double delta = std::exp(t.log_weight);
      RVector wt(nb);
      RVector wt2(nb);
      for (Index i = 0; i < nb; ++i) {
        const double l = std::isinf(prior) ? prior : prior + t.log_det - log_det_noise_ - (quad0(i) - quad(i));
        const double s = inv_one_plus_exp(l);
        wt(i) = delta * s;
        wt2(i) = delta * s * (1.0 - s);
      }
      const CMatrix mt = t.sigma.cast<Complex>().asDiagonal() * w.conjugate();  // column i is m_i^T
      out.estimates.middleRows(start, nb).noalias() += wt.cast<Complex>().asDiagonal() * mt.transpose();
      if (with_jacobian) {
        out.jacobian_sum += wt.sum() * t.gain;
        out.jacobian_sum.noalias() += (w0 - w) * wt2.cast<Complex>().asDiagonal() * mt.transpose();
      }
    }
    for (Index i = 0; i < nb; ++i) out.np_scores(start + i) = log_sum_exp(a.col(i)) - a0(i);
  }
  return out;
}

}  // namespace cfura
