#pragma once

#include <optional>
#include <vector>

#include "cfura/airlink.hpp"

namespace cfura {

/// Linear MMSE channel estimation with known active set and positions. One Cholesky factor of
/// Sigma_b = sum_A gamma_b(q) s s^H + sigma_w^2 I per RU.
class GenieContext {
 public:
  GenieContext(const std::vector<CMatrix>& codebooks, const GroundTruth& truth, const NetworkGeometry& g,
               double noise_variance);

  Index num_active() const { return static_cast<Index>(members_.size()); }
  /// Position of (u, n) in the active list; absent when inactive.
  std::optional<Index> find(Index u, Index n) const;
  std::pair<Index, Index> member(Index k) const { return members_[static_cast<std::size_t>(k)]; }

  /// All active channel estimates, |A| x F, rows in member order.
  CMatrix estimate_all(const CMatrix& y) const;
  /// Estimate of one message; throws ConfigError for an inactive message.
  CRow estimate_channel(Index u, Index n, const CMatrix& y) const;

  /// gamma - gamma^2 s^H Sigma_b^{-1} s for one message and RU.
  double analytic_mse(Index u, Index n, Index b) const;
  /// Mean analytic MSE over the F coefficients of message k.
  double analytic_component_mse(Index k) const;

  const CMatrix& active_codewords() const { return s_active_; }
  const RMatrix& gains() const { return gains_; }
  const CMatrix& covariance(Index b) const { return sigma_[static_cast<std::size_t>(b)]; }
  Index antennas_per_ru() const { return m_; }

 private:
  Index index_or_throw(Index u, Index n) const;

  Index m_ = 1;
  std::vector<std::pair<Index, Index>> members_;
  CMatrix s_active_;             // L x |A|
  RMatrix gains_;                // |A| x B
  std::vector<CMatrix> sigma_;   // Sigma_b
  std::vector<CMatrix> solved_;  // Sigma_b^{-1} S_A
  RMatrix mse_;                  // |A| x B analytic
};

/// (1/U') sum_u mean over entries of per_location[u], skipping empty locations; absent if all empty.
std::optional<double> aggregate_mse(const std::vector<std::vector<double>>& per_location);

struct GenieMonteCarlo {
  double empirical = 0.0;  // mean over draws of the aggregate MSE
  double std_error = 0.0;  // standard error of that mean
  double analytic = 0.0;   // aggregate of the analytic MSEs
  Index draws = 0;
};

/// Redraws channels (at the fixed positions) and noise `draws` times with S and the active set fixed,
/// and aggregates the per-message per-coefficient squared error over `selected` messages per location.
GenieMonteCarlo genie_monte_carlo(const GenieContext& ctx, const GroundTruth& truth, const NetworkGeometry& g,
                                  double noise_variance, const std::vector<std::vector<Index>>& selected, Index draws,
                                  Rng& rng);

}  // namespace cfura
