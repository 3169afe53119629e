#include "cfura/positioning.hpp"

#include <algorithm>
#include <cmath>

namespace cfura {

Index map_position(const Denoiser& denoiser, const CRow& r, RVector* objective) {
  const RVector obj = denoiser.position_objective(r);
  Index best = 0;
  for (Index q = 1; q < obj.size(); ++q) {
    if (obj(q) > obj(best)) best = q;
  }
  if (objective) *objective = obj;
  return best;
}

Index oracle_position(const NetworkGeometry& g, const PositionGrid& grid, Point2D truth) {
  return g.nearest_grid_point(grid, truth);
}

PositionEstimate estimate_position(const Denoiser& denoiser, const PositionGrid& grid, const NetworkGeometry& g,
                                   const CRow& r, Point2D truth, Index location, Index codeword) {
  if (grid.size() != denoiser.grid_size()) throw ConfigError("grid does not match denoiser");
  PositionEstimate e;
  e.location = location;
  e.codeword = codeword;
  e.truth = truth;
  e.map_index = map_position(denoiser, r);
  e.oracle_index = oracle_position(g, grid, truth);
  e.estimate = grid.points[static_cast<std::size_t>(e.map_index)];
  e.oracle = grid.points[static_cast<std::size_t>(e.oracle_index)];
  e.error = g.distance(e.estimate, truth);
  e.oracle_error = g.distance(e.oracle, truth);
  return e;
}

namespace {

double fraction_at_most(const std::vector<double>& sorted, double x) {
  if (sorted.empty()) return 0.0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

}  // namespace

CdfTable error_cdf(const std::vector<PositionEstimate>& estimates, const std::vector<double>& error_grid) {
  std::vector<double> m;
  std::vector<double> o;
  m.reserve(estimates.size());
  o.reserve(estimates.size());
  for (const auto& e : estimates) {
    m.push_back(e.error);
    o.push_back(e.oracle_error);
  }
  std::sort(m.begin(), m.end());
  std::sort(o.begin(), o.end());
  CdfTable t;
  t.samples = static_cast<Index>(estimates.size());
  for (double x : error_grid) {
    t.error_km.push_back(x);
    t.map_cdf.push_back(fraction_at_most(m, x));
    t.oracle_cdf.push_back(fraction_at_most(o, x));
  }
  return t;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS distance needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace cfura
