#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cfura/scenario.hpp"

namespace cfura {

/// L x N matrix with i.i.d. CN(0, 1/L) entries; columns are codewords.
CMatrix sample_codebook(Index block_length, Index codewords, Rng& rng);

std::vector<CMatrix> sample_codebooks(const std::vector<LocationPrior>& priors, Index block_length, Rng& rng);

struct LocationTruth {
  std::vector<Index> active;          // sorted codeword indices with a_{u,n} = 1
  std::vector<Point2D> positions;     // continuous user positions, aligned with `active`
  CMatrix channels;                   // X_u, N_u x F; inactive rows are zero
};

struct GroundTruth {
  std::vector<LocationTruth> locations;

  Index total_active() const;
  double channel_energy() const;
};

/// Draws a position from the user support of `prior` (tile by weight, then uniform in the tile).
Point2D sample_user_position(const LocationPrior& prior, const NetworkGeometry& g, Rng& rng);

/// n channel rows of active users drawn from the source model; positions appended when requested.
CMatrix sample_active_channels(const LocationPrior& prior, const NetworkGeometry& g, Index n, Rng& rng,
                               std::vector<Point2D>* positions = nullptr);

/// E||x||^2 per row under the source model (activity included), by quadrature over the support.
double expected_row_energy(const LocationPrior& prior, const NetworkGeometry& g);

/// E[Sigma(q)] diagonal under the user distribution, excluding activity.
RVector expected_profile(const LocationPrior& prior, const NetworkGeometry& g);

/// Bernoulli activities, continuous uniform positions and h ~ CN(0, Sigma(q)).
GroundTruth sample_ground_truth(const std::vector<LocationPrior>& priors, const NetworkGeometry& g, Rng& rng);

struct ReceivedSignal {
  CMatrix y;  // L x F
  double noise_variance = 0.0;
};

/// Y = sum_u S_u X_u + W, W i.i.d. CN(0, noise_variance).
ReceivedSignal synthesize(const std::vector<CMatrix>& codebooks, const GroundTruth& truth, double noise_variance,
                          Rng& rng);

struct SlotDump {
  std::uint64_t seed = 0;
  ReceivedSignal signal;
  GroundTruth truth;
};

/// Binary artifact: "CFURASLOT1\n", u64 header length, JSON header, then raw complex doubles
/// (Y column-major, then each X_u column-major).
void write_slot_dump(const std::filesystem::path& path, const SlotDump& dump);
SlotDump read_slot_dump(const std::filesystem::path& path);

}  // namespace cfura
