#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "cfura/types.hpp"

namespace cfura {

/// Purpose tags for decorrelated substreams derived from one master seed.
enum class Stream : std::uint64_t {
  codebook = 1,
  truth = 2,
  noise = 3,
  state_evolution = 4,
  calibration = 5,
  genie = 6,
};

std::string_view stream_name(Stream s);

/// Deterministic PRNG wrapper. Same seed gives the same sequence on one toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  Complex complex_normal(double variance);
  /// Index in [0, n).
  Index index(Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// splitmix64 finalizer; used to derive substream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed of substream (purpose, a, b) under `master`.
std::uint64_t substream_seed(std::uint64_t master, Stream purpose, std::uint64_t a = 0, std::uint64_t b = 0);

inline Rng substream(std::uint64_t master, Stream purpose, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(substream_seed(master, purpose, a, b));
}

/// Fills `m` with i.i.d. CN(0, variance) entries, column-major order.
void fill_complex_normal(Eigen::Ref<CMatrix> m, double variance, Rng& rng);

}  // namespace cfura
