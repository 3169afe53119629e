#include "cfura/state_evolution.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "cfura/airlink.hpp"
#include "cfura/parallel.hpp"

namespace cfura {

namespace {

void require_same_dim(const std::vector<LocationPrior>& priors, Index F) {
  for (const auto& p : priors) {
    for (const auto& s : p.profiles) {
      if (s.size() != F) throw ConfigError("prior profile length does not match antenna count");
    }
  }
}

}  // namespace

CMatrix initial_covariance(const std::vector<LocationPrior>& priors, double noise_variance, Index block_length) {
  if (priors.empty()) throw ConfigError("no locations");
  const Index F = priors.front().profiles.front().size();
  require_same_dim(priors, F);
  RVector d = RVector::Constant(F, noise_variance);
  for (const auto& p : priors) {
    RVector mean = RVector::Zero(F);
    for (std::size_t q = 0; q < p.profiles.size(); ++q) mean += p.grid.weights[q] * p.profiles[q];
    d += p.load(block_length) * p.activity * mean;
  }
  return d.cast<Complex>().asDiagonal();
}

CMatrix initial_covariance(const std::vector<LocationPrior>& priors, const NetworkGeometry& g,
                           double noise_variance, Index block_length) {
  RVector d = RVector::Constant(g.num_antennas(), noise_variance);
  for (const auto& p : priors) d += p.load(block_length) * p.activity * expected_profile(p, g);
  return d.cast<Complex>().asDiagonal();
}

SeStep se_step(const CMatrix& c, const std::vector<LocationPrior>& priors, const NetworkGeometry& g,
               double noise_variance, Index block_length, const SeOptions& options, int iteration) {
  if (options.samples < 2) throw ConfigError("se_samples must be >= 2");
  const Index F = g.num_antennas();
  if (c.rows() != F || c.cols() != F) throw ConfigError("covariance size does not match antenna count");
  Eigen::LLT<CMatrix> llt(0.5 * (c + c.adjoint()));
  if (llt.info() != Eigen::Success) throw NumericalError("SE covariance is not positive definite", iteration);
  const CMatrix factor_h = llt.matrixL().toDenseMatrix().adjoint();

  const Index U = static_cast<Index>(priors.size());
  std::vector<CMatrix> error(static_cast<std::size_t>(U));
  std::vector<CMatrix> jac(static_cast<std::size_t>(U));
  parallel_for(U, [&](Index u) {
    const LocationPrior& prior = priors[static_cast<std::size_t>(u)];
    const double lambda = prior.activity;
    Index n_act = options.samples / 2;
    if (lambda <= 0.0) n_act = 0;
    if (lambda >= 1.0) n_act = options.samples;
    const Index n_in = options.samples - n_act;

    Rng rng = substream(options.seed, Stream::state_evolution, static_cast<std::uint64_t>(u));
    const CMatrix x = sample_active_channels(prior, g, n_act, rng);
    CMatrix za(n_act, F);
    fill_complex_normal(za, 1.0, rng);
    CMatrix zi(n_in, F);
    fill_complex_normal(zi, 1.0, rng);

    const Denoiser den(prior, c, options.denoiser, iteration);
    CMatrix e = CMatrix::Zero(F, F);
    CMatrix j = CMatrix::Zero(F, F);
    if (n_act > 0) {
      const auto b = den.apply(x + za * factor_h, true);
      const CMatrix err = b.estimates - x;
      e += (lambda / static_cast<double>(n_act)) * (err.adjoint() * err);
      j += (lambda / static_cast<double>(n_act)) * b.jacobian_sum;
    }
    if (n_in > 0) {
      const auto b = den.apply(zi * factor_h, true);
      e += ((1.0 - lambda) / static_cast<double>(n_in)) * (b.estimates.adjoint() * b.estimates);
      j += ((1.0 - lambda) / static_cast<double>(n_in)) * b.jacobian_sum;
    }
    error[static_cast<std::size_t>(u)] = std::move(e);
    jac[static_cast<std::size_t>(u)] = std::move(j);
  });

  SeStep out;
  out.next = CMatrix::Identity(F, F) * noise_variance;
  for (Index u = 0; u < U; ++u) {
    const double alpha = priors[static_cast<std::size_t>(u)].load(block_length);
    out.next += alpha * error[static_cast<std::size_t>(u)];
    out.error_energy += alpha * error[static_cast<std::size_t>(u)].trace().real();
  }
  out.next = 0.5 * (out.next + out.next.adjoint()).eval();
  if (!out.next.allFinite()) throw NumericalError("SE covariance became non-finite", iteration + 1);
  out.onsager = std::move(jac);
  return out;
}

SeTrace run_se(const std::vector<LocationPrior>& priors, const NetworkGeometry& g, double noise_variance,
               Index block_length, int iterations, const SeOptions& options) {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  SeTrace trace;
  trace.noise_variance = noise_variance;
  trace.samples = options.samples;
  trace.seed = options.seed;
  double energy = 0.0;
  for (const auto& p : priors) energy += p.load(block_length) * expected_row_energy(p, g);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  trace.covariance.push_back(initial_covariance(priors, g, noise_variance, block_length));
  trace.mse.push_back(energy > 0.0 ? 1.0 : nan);
  for (int t = 1; t <= iterations; ++t) {
    SeStep step = se_step(trace.covariance.back(), priors, g, noise_variance, block_length, options, t);
    trace.covariance.push_back(std::move(step.next));
    trace.mse.push_back(energy > 0.0 ? step.error_energy / energy : nan);
    trace.onsager.push_back(std::move(step.onsager));
  }
  return trace;
}

void write_se_csv(const std::filesystem::path& path, const SeTrace& trace, const std::string& manifest_hash) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  out << "manifest_hash,t,se_mse,trace_c\n";
  for (std::size_t i = 0; i < trace.mse.size(); ++i) {
    out << manifest_hash << ',' << i + 1 << ',' << trace.mse[i] << ',' << trace.covariance[i].trace().real() << '\n';
  }
}

void write_se_json(const std::filesystem::path& path, const SeTrace& trace) {
  nlohmann::json j;
  j["noise_variance"] = trace.noise_variance;
  j["samples"] = trace.samples;
  j["seed"] = trace.seed;
  j["mse"] = trace.mse;
  auto& cs = j["covariance"];
  cs = nlohmann::json::array();
  for (std::size_t t = 0; t < trace.covariance.size(); ++t) {
    const CMatrix& c = trace.covariance[t];
    nlohmann::json re = nlohmann::json::array();
    nlohmann::json im = nlohmann::json::array();
    for (Index r = 0; r < c.rows(); ++r) {
      std::vector<double> a(static_cast<std::size_t>(c.cols()));
      std::vector<double> b(static_cast<std::size_t>(c.cols()));
      for (Index k = 0; k < c.cols(); ++k) {
        a[static_cast<std::size_t>(k)] = c(r, k).real();
        b[static_cast<std::size_t>(k)] = c(r, k).imag();
      }
      re.push_back(a);
      im.push_back(b);
    }
    cs.push_back({{"t", t + 1}, {"re", re}, {"im", im}});
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace cfura
