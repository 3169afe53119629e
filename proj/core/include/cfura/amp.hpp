#pragma once

#include <optional>
#include <vector>

#include "cfura/airlink.hpp"
#include "cfura/state_evolution.hpp"

namespace cfura {

struct AmpOptions {
  int iterations = 8;
  OnsagerMode onsager = OnsagerMode::empirical;
  CovarianceSource covariance = CovarianceSource::empirical;
  DenoiserOptions denoiser;
  /// Required when either the covariance source or the Onsager mode is `se`.
  const SeTrace* se = nullptr;
  /// Used only for metrics.
  const GroundTruth* truth = nullptr;
  /// Stop once ||X^(t+1) - X^(t)|| <= tol * ||X^(t+1)||; 0 disables.
  double early_stop_tol = 0.0;
};

struct AmpIteration {
  int t = 0;
  std::optional<double> mse;  // normalized MSE of X^(t)
  double trace_c = 0.0;       // trace of C^(t)
  double wall_seconds = 0.0;
};

struct AmpTrace {
  std::vector<AmpIteration> iterations;
  std::optional<double> final_mse;    // normalized MSE of X^(T+1)
  std::vector<CMatrix> covariance;    // C^(t) used by the denoiser at each iteration
  CMatrix final_covariance;           // C^(T)
  CMatrix final_residual_covariance;  // pooled covariance of the rows of S_u^H Z^(T)
  std::vector<CMatrix> decoupled;     // R_u^(T)
  std::vector<CMatrix> estimates;     // X_u^(T+1)
  std::vector<RVector> np_scores;     // log Lambda_NP of the rows of R_u^(T) under C^(T)
  int iterations_run = 0;
};

/// sum_u ||X_u - X_u^true||_F^2 / sum_u ||X_u^true||_F^2; absent when the truth is all zero.
std::optional<double> normalized_mse(const std::vector<CMatrix>& estimates, const GroundTruth& truth);

/// Pooled covariance of the rows of S_u^H Z over all locations.
CMatrix pooled_residual_covariance(const std::vector<CMatrix>& codebooks, const CMatrix& z);

/// Multisource AMP with Z^(0) = 0 and X_u^(1) = 0.
AmpTrace run_amp(const CMatrix& y, const std::vector<CMatrix>& codebooks, const std::vector<LocationPrior>& priors,
                 double noise_variance, const AmpOptions& options);

}  // namespace cfura
