#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cfura/denoiser.hpp"

namespace cfura {

/// sigma_w^2 I + sum_u alpha_u lambda_u sum_q delta_u(q) Sigma(q), using the decoder grids.
CMatrix initial_covariance(const std::vector<LocationPrior>& priors, double noise_variance, Index block_length);

/// Same first-pass covariance with E[Sigma(q)] taken under the continuous user distribution.
CMatrix initial_covariance(const std::vector<LocationPrior>& priors, const NetworkGeometry& g,
                           double noise_variance, Index block_length);

struct SeOptions {
  /// Monte Carlo draws per location per iteration, split evenly between active and inactive strata.
  Index samples = 20000;
  DenoiserOptions denoiser;
  std::uint64_t seed = 0;
};

struct SeStep {
  CMatrix next;                  // C^(t+1)
  double error_energy = 0.0;     // sum_u alpha_u E||eta - x||^2
  std::vector<CMatrix> onsager;  // E[eta'_{u,t}(x + phi)] per location
};

/// One recursion step under phi ~ CN(0, C). The draws for location u come from a fixed substream,
/// so successive steps and decoder variants share common random numbers.
SeStep se_step(const CMatrix& c, const std::vector<LocationPrior>& priors, const NetworkGeometry& g,
               double noise_variance, Index block_length, const SeOptions& options, int iteration);

struct SeTrace {
  std::vector<CMatrix> covariance;            // C^(1), ..., C^(T+1)
  std::vector<double> mse;                    // predicted normalized MSE of X^(1), ..., X^(T+1)
  std::vector<std::vector<CMatrix>> onsager;  // onsager[t-1][u] = E[eta'_{u,t}]
  double noise_variance = 0.0;
  Index samples = 0;
  std::uint64_t seed = 0;

  int iterations() const { return static_cast<int>(onsager.size()); }
  const CMatrix& at(int t) const { return covariance.at(static_cast<std::size_t>(t - 1)); }
};

SeTrace run_se(const std::vector<LocationPrior>& priors, const NetworkGeometry& g, double noise_variance,
               Index block_length, int iterations, const SeOptions& options);

/// Columns: manifest_hash, t, se_mse, trace_c.
void write_se_csv(const std::filesystem::path& path, const SeTrace& trace, const std::string& manifest_hash);
/// Full matrices as {"t": .., "re": [[..]], "im": [[..]]}.
void write_se_json(const std::filesystem::path& path, const SeTrace& trace);

}  // namespace cfura
