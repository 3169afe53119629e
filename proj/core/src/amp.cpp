#include "cfura/amp.hpp"

#include <chrono>
#include <cmath>

#include "cfura/parallel.hpp"

namespace cfura {

std::optional<double> normalized_mse(const std::vector<CMatrix>& estimates, const GroundTruth& truth) {
  if (estimates.size() != truth.locations.size()) throw ConfigError("estimate/truth location count mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t u = 0; u < estimates.size(); ++u) {
    num += (estimates[u] - truth.locations[u].channels).squaredNorm();
    den += truth.locations[u].channels.squaredNorm();
  }
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

CMatrix pooled_residual_covariance(const std::vector<CMatrix>& codebooks, const CMatrix& z) {
  CMatrix acc = CMatrix::Zero(z.cols(), z.cols());
  Index rows = 0;
  for (const auto& s : codebooks) {
    const CMatrix d = s.adjoint() * z;
    acc.noalias() += d.adjoint() * d;
    rows += d.rows();
  }
  return acc / static_cast<double>(rows);
}

AmpTrace run_amp(const CMatrix& y, const std::vector<CMatrix>& codebooks, const std::vector<LocationPrior>& priors,
                 double noise_variance, const AmpOptions& options) {
  using clock = std::chrono::steady_clock;
  const Index U = static_cast<Index>(codebooks.size());
  const Index L = y.rows();
  const Index F = y.cols();
  const int T = options.iterations;
  if (T < 1) throw ConfigError("iterations must be >= 1");
  if (U == 0 || static_cast<Index>(priors.size()) != U) throw ConfigError("codebook/prior count mismatch");
  for (Index u = 0; u < U; ++u) {
    const auto& s = codebooks[static_cast<std::size_t>(u)];
    if (s.rows() != L || s.cols() != priors[static_cast<std::size_t>(u)].codewords) {
      throw ConfigError("codebook " + std::to_string(u) + " has the wrong shape");
    }
  }
  const bool need_se = options.covariance == CovarianceSource::se || options.onsager == OnsagerMode::se;
  if (need_se) {
    if (!options.se) throw ConfigError("SE trace required by the chosen covariance/Onsager mode");
    if (options.se->iterations() < T) throw ConfigError("SE trace shorter than the AMP iteration budget");
    if (options.se->at(1).rows() != F) throw ConfigError("SE trace dimension mismatch");
  }
  if (options.truth && static_cast<Index>(options.truth->locations.size()) != U) {
    throw ConfigError("truth location count mismatch");
  }
  if (!(noise_variance >= 0.0)) throw ConfigError("noise variance must be >= 0");

  std::vector<CMatrix> x(static_cast<std::size_t>(U));
  std::vector<CMatrix> q(static_cast<std::size_t>(U), CMatrix::Zero(F, F));
  for (Index u = 0; u < U; ++u) x[static_cast<std::size_t>(u)] = CMatrix::Zero(priors[static_cast<std::size_t>(u)].codewords, F);
  CMatrix z_prev = CMatrix::Zero(L, F);
  const double y_norm = y.norm();

  AmpTrace trace;
  for (int t = 1; t <= T; ++t) {
    const auto start = clock::now();
    CMatrix gamma = CMatrix::Zero(L, F);
    for (Index u = 0; u < U; ++u) {
      const auto& s = codebooks[static_cast<std::size_t>(u)];
      gamma.noalias() += s * x[static_cast<std::size_t>(u)];
      if (t > 1) gamma.noalias() -= priors[static_cast<std::size_t>(u)].load(L) * (z_prev * q[static_cast<std::size_t>(u)]);
    }
    const CMatrix z = y - gamma;
    if (!z.allFinite()) throw NumericalError("residual became non-finite", t);
    if ((y - z - gamma).norm() > 1e-8 * std::max(y_norm, 1e-300)) {
      throw NumericalError("residual identity violated", t);
    }

    std::vector<CMatrix> r(static_cast<std::size_t>(U));
    parallel_for(U, [&](Index u) {
      r[static_cast<std::size_t>(u)] = codebooks[static_cast<std::size_t>(u)].adjoint() * z + x[static_cast<std::size_t>(u)];
    });

    const bool last = t == T;
    CMatrix c_emp;
    if (options.covariance == CovarianceSource::empirical || last || options.early_stop_tol > 0.0) {
      CMatrix acc = CMatrix::Zero(F, F);
      Index rows = 0;
      for (Index u = 0; u < U; ++u) {
        const CMatrix d = r[static_cast<std::size_t>(u)] - x[static_cast<std::size_t>(u)];
        acc.noalias() += d.adjoint() * d;
        rows += d.rows();
      }
      c_emp = acc / static_cast<double>(rows);
      c_emp = 0.5 * (c_emp + c_emp.adjoint()).eval();
    }
    const CMatrix c = options.covariance == CovarianceSource::se ? options.se->at(t) : c_emp;

    AmpIteration it;
    it.t = t;
    it.trace_c = c.trace().real();
    if (options.truth) it.mse = normalized_mse(x, *options.truth);

    const bool need_jac = options.onsager == OnsagerMode::empirical;
    std::vector<CMatrix> x_next(static_cast<std::size_t>(U));
    std::vector<CMatrix> q_next(static_cast<std::size_t>(U));
    std::vector<RVector> scores(static_cast<std::size_t>(U));
    parallel_for(U, [&](Index u) {
      const auto& prior = priors[static_cast<std::size_t>(u)];
      const Denoiser den(prior, c, options.denoiser, t);
      auto b = den.apply(r[static_cast<std::size_t>(u)], need_jac);
      if (!b.estimates.allFinite()) throw NumericalError("denoiser output became non-finite", t);
      if (need_jac) {
        q_next[static_cast<std::size_t>(u)] = b.jacobian_sum / static_cast<double>(prior.codewords);
      } else {
        q_next[static_cast<std::size_t>(u)] = options.se->onsager[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(u)];
      }
      x_next[static_cast<std::size_t>(u)] = std::move(b.estimates);
      scores[static_cast<std::size_t>(u)] = std::move(b.np_scores);
    });

    bool stop = last;
    if (!stop && options.early_stop_tol > 0.0) {
      double diff = 0.0;
      double norm = 0.0;
      for (Index u = 0; u < U; ++u) {
        diff += (x_next[static_cast<std::size_t>(u)] - x[static_cast<std::size_t>(u)]).squaredNorm();
        norm += x_next[static_cast<std::size_t>(u)].squaredNorm();
      }
      stop = diff <= options.early_stop_tol * options.early_stop_tol * norm;
    }

    it.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
    trace.iterations.push_back(it);
    trace.covariance.push_back(c);
    trace.iterations_run = t;

    x = std::move(x_next);
    q = std::move(q_next);
    z_prev = z;
    if (stop) {
      trace.final_covariance = c;
      trace.final_residual_covariance = c_emp;
      trace.decoupled = std::move(r);
      trace.np_scores = std::move(scores);
      break;
    }
  }
  if (options.truth) trace.final_mse = normalized_mse(x, *options.truth);
  trace.estimates = std::move(x);
  return trace;
}

}  // namespace cfura
