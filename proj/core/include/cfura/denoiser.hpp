#pragma once

#include <optional>
#include <vector>

#include "cfura/scenario.hpp"

namespace cfura {

struct DenoiserOptions {
  MixtureWeights mixture = MixtureWeights::posterior;
  /// Batch evaluation skips a grid point for a row when an upper bound on its log-weight lies this
  /// many nats below the best exactly-evaluated active hypothesis. Set to +inf to disable.
  double prune_margin = 40.0;
  Index block_rows = 256;
};

/// Posterior-mean denoiser for r = a h + phi, h ~ sum_q delta(q) CN(0, Sigma(q)), phi ~ CN(0, C).
///
/// Holds the per-(u,t) cache: Cholesky factors of C and of Sigma(q) + C, the gains
/// A(q) = (Sigma(q) + C)^{-1} Sigma(q), log-determinants and log prior weights. Row evaluation is
/// const and safe to call concurrently.
///
/// Jacobian orientation: entry (i, j) = d eta_j / d r_i (non-conjugate Wirtinger derivative), so
/// a linear denoiser r -> r A has Jacobian A.
class Denoiser {
 public:
  Denoiser(const LocationPrior& prior, const CMatrix& noise_cov, DenoiserOptions options = {},
           std::optional<int> iteration = std::nullopt);

  Index dim() const { return dim_; }
  Index grid_size() const { return static_cast<Index>(grid_.size()); }
  double activity() const { return activity_; }
  const DenoiserOptions& options() const { return options_; }

  const CMatrix& gain(Index q) const { return grid_[static_cast<std::size_t>(q)].gain; }
  double log_det_sum(Index q) const { return grid_[static_cast<std::size_t>(q)].log_det; }
  double log_det_noise() const { return log_det_noise_; }
  /// log((1 - lambda) / lambda); +inf for lambda = 0, -inf for lambda = 1.
  double log_prior_ratio() const;

  /// r C^{-1} r^H via the cached factor.
  double quad_noise(const CRow& r) const;
  /// r (Sigma(q) + C)^{-1} r^H via the cached factor.
  double quad_sum(const CRow& r, Index q) const;

  /// E[h | r, a = 1, q] = r A(q).
  CRow conditional_mean(const CRow& r, Index q) const;
  /// log Lambda_map(r | q), evaluated in the log domain.
  double map_log_ratio(const CRow& r, Index q) const;
  /// log Lambda_NP(r) = log p(r | a = 1) - log p(r | a = 0).
  double np_log_ratio(const CRow& r) const;
  /// log delta(q) - log|Sigma(q) + C| - r (Sigma(q) + C)^{-1} r^H for every grid point.
  RVector position_objective(const CRow& r) const;
  /// Posterior probabilities of (a = 1, q) for every q; the remainder is P(a = 0 | r).
  RVector active_posterior(const CRow& r) const;

  CRow posterior_mean(const CRow& r) const;
  CMatrix jacobian(const CRow& r) const;

  struct Batch {
    CMatrix estimates;      // eta applied row-wise
    RVector np_scores;      // log Lambda_NP per row
    CMatrix jacobian_sum;   // sum over rows of eta'(r_n); empty unless requested
  };
  /// Row-wise evaluation of a matrix argument.
  Batch apply(const CMatrix& rows, bool with_jacobian) const;

 private:
  struct GridTerm {
    RVector sigma;
    Eigen::LLT<CMatrix> llt;
    CMatrix inv;  // (Sigma(q) + C)^{-1}, for blocked products
    CMatrix gain;
    double log_det = 0.0;
    double log_weight = 0.0;
    RVector bound_inv;  // 1 / (sigma_f + e_f), e = row-abs-sum of C
  };

  // a_q = log delta(q) - log|K_q| - quad_q  and  a_0 = -log|C| - quad_0
  RVector active_log_terms(const CRow& r) const;
  double inactive_log_term(const CRow& r) const;

  Batch apply_posterior(const CMatrix& rows, bool with_jacobian) const;
  Batch apply_prior_weighted(const CMatrix& rows, bool with_jacobian) const;

  Index dim_ = 0;
  double activity_ = 0.0;
  DenoiserOptions options_;
  Eigen::LLT<CMatrix> noise_llt_;
  CMatrix noise_inv_;
  double log_det_noise_ = 0.0;
  std::vector<GridTerm> grid_;
};

double log_sum_exp(const RVector& v);

}  // namespace cfura
