#include "cfura/rng.hpp"

#include <cmath>

namespace cfura {

std::string_view stream_name(Stream s) {
  switch (s) {
    case Stream::codebook: return "codebook";
    case Stream::truth: return "truth";
    case Stream::noise: return "noise";
    case Stream::state_evolution: return "state_evolution";
    case Stream::calibration: return "calibration";
    case Stream::genie: return "genie";
  }
  return "unknown";
}

Complex Rng::complex_normal(double variance) {
  const double s = std::sqrt(0.5 * variance);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

Index Rng::index(Index n) {
  std::uniform_int_distribution<Index> d(0, n - 1);
  return d(engine_);
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t master, Stream purpose, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix_seed(master);
  h = mix_seed(h ^ static_cast<std::uint64_t>(purpose));
  h = mix_seed(h ^ a);
  h = mix_seed(h ^ (b * 0xD1B54A32D192ED03ULL));
  return h;
}

void fill_complex_normal(Eigen::Ref<CMatrix> m, double variance, Rng& rng) {
  const double s = std::sqrt(0.5 * variance);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      m(i, j) = Complex(s * re, s * im);
    }
  }
}

}  // namespace cfura
