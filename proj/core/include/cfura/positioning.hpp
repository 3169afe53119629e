#pragma once

#include <vector>

#include "cfura/denoiser.hpp"

namespace cfura {

/// argmax_q of the denoiser's position objective; ties go to the smallest index.
Index map_position(const Denoiser& denoiser, const CRow& r, RVector* objective = nullptr);

/// Nearest grid point to the true position.
Index oracle_position(const NetworkGeometry& g, const PositionGrid& grid, Point2D truth);

struct PositionEstimate {
  Index location = 0;
  Index codeword = 0;
  Index map_index = 0;
  Index oracle_index = 0;
  Point2D estimate;
  Point2D oracle;
  Point2D truth;
  double error = 0.0;         // torus distance estimate -> truth (km)
  double oracle_error = 0.0;  // torus distance oracle -> truth (km)
};

PositionEstimate estimate_position(const Denoiser& denoiser, const PositionGrid& grid, const NetworkGeometry& g,
                                   const CRow& r, Point2D truth, Index location, Index codeword);

struct CdfTable {
  std::vector<double> error_km;
  std::vector<double> map_cdf;
  std::vector<double> oracle_cdf;
  Index samples = 0;
};

/// Empirical CDFs of MAP and oracle errors on a fixed error grid.
CdfTable error_cdf(const std::vector<PositionEstimate>& estimates, const std::vector<double>& error_grid);

/// sup_x |F_a(x) - F_b(x)| between two empirical distributions, evaluated exactly.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Sample median (mean of the two middle values for even sizes).
double median(std::vector<double> v);

}  // namespace cfura
