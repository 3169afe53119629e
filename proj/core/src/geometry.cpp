#include "cfura/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfura {

double norm(Point2D p) { return std::hypot(p.x, p.y); }

double TorusMap::area() const {
  return std::abs(b1.x * b2.y - b1.y * b2.x) * static_cast<double>(n1) * static_cast<double>(n2);
}

std::array<double, 2> TorusMap::to_lattice(Point2D p) const {
  const double det = b1.x * b2.y - b1.y * b2.x;
  const double s = (p.x * b2.y - p.y * b2.x) / det;
  const double t = (b1.x * p.y - b1.y * p.x) / det;
  return {s, t};
}

Point2D TorusMap::from_lattice(double s, double t) const { return s * b1 + t * b2; }

Point2D TorusMap::wrap(Point2D p) const {
  auto [s, t] = to_lattice(p);
  const double w1 = n1;
  const double w2 = n2;
  s -= w1 * std::floor(s / w1);
  t -= w2 * std::floor(t / w2);
  if (s >= w1) s -= w1;
  if (t >= w2) t -= w2;
  return from_lattice(s, t);
}

Point2D TorusMap::displacement(Point2D from, Point2D to) const {
  auto [s, t] = to_lattice(to - from);
  s -= n1 * std::round(s / n1);
  t -= n2 * std::round(t / n2);
  Point2D best = from_lattice(s, t);
  double best_norm = norm(best);
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      if (i == 0 && j == 0) continue;
      const Point2D d = from_lattice(s + i * n1, t + j * n2);
      const double dn = norm(d);
      if (dn < best_norm) {
        best_norm = dn;
        best = d;
      }
    }
  }
  return best;
}

NetworkGeometry NetworkGeometry::build(const NetworkParams& params) {
  if (!(params.side_km > 0.0) || !std::isfinite(params.side_km)) throw ConfigError("tile side must be positive");
  if (params.n1 < 1 || params.n2 < 1) throw ConfigError("torus replication counts must be >= 1");
  if (params.antennas_per_ru < 1) throw ConfigError("antennas per RU must be >= 1");
  if (!(params.cutoff_km > 0.0)) throw ConfigError("pathloss cutoff distance must be positive");
  if (!(params.pathloss_exponent >= 0.0)) throw ConfigError("pathloss exponent must be non-negative");

  NetworkGeometry g;
  g.params_ = params;
  const double s = params.side_km;
  g.torus_ = TorusMap{{s, 0.0}, {0.5 * s, 0.5 * std::sqrt(3.0) * s}, params.n1, params.n2};

  for (int j = 0; j < params.n2; ++j) {
    for (int i = 0; i < params.n1; ++i) g.rus_.push_back(g.torus_.from_lattice(i, j));
  }

  const Point2D b1 = g.torus_.b1;
  const Point2D b2 = g.torus_.b2;
  std::vector<LocationTile> faces;
  for (int j = 0; j < params.n2; ++j) {
    for (int i = 0; i < params.n1; ++i) {
      const Point2D v = g.torus_.from_lattice(i, j);
      LocationTile up;
      up.vertices = {v, v + b1, v + b2};
      up.cell_i = i;
      up.cell_j = j;
      up.upward = true;
      LocationTile down;
      down.vertices = {v + b1, v + b1 + b2, v + b2};
      down.cell_i = i;
      down.cell_j = j;
      down.upward = false;
      for (LocationTile* t : {&up, &down}) {
        t->side = s;
        const Point2D c = (1.0 / 3.0) * (t->vertices[0] + t->vertices[1] + t->vertices[2]);
        t->centroid = g.torus_.wrap(c);
        faces.push_back(*t);
      }
    }
  }

  // Raster order: by columns (centroid x), bottom to top (centroid y).
  const double tol = 1e-9 * s;
  std::stable_sort(faces.begin(), faces.end(), [tol](const LocationTile& a, const LocationTile& b) {
    if (std::abs(a.centroid.x - b.centroid.x) > tol) return a.centroid.x < b.centroid.x;
    return a.centroid.y < b.centroid.y - tol;
  });

  g.cell_to_tile_.assign(faces.size(), 0);
  for (std::size_t u = 0; u < faces.size(); ++u) {
    faces[u].id = static_cast<int>(u);
    const auto& f = faces[u];
    g.cell_to_tile_[static_cast<std::size_t>((f.cell_j * params.n1 + f.cell_i) * 2 + (f.upward ? 0 : 1))] =
        static_cast<Index>(u);
  }
  g.tiles_ = std::move(faces);
  return g;
}

double NetworkGeometry::distance(Point2D p, Point2D q) const { return norm(torus_.displacement(p, q)); }

double NetworkGeometry::pathloss(Index ru, Point2D q) const {
  const double d = distance(q, rus_.at(static_cast<std::size_t>(ru)));
  return 1.0 / (1.0 + std::pow(d / params_.cutoff_km, params_.pathloss_exponent));
}

RVector NetworkGeometry::covariance_profile(Point2D q) const {
  const Index m = antennas_per_ru();
  RVector out(num_antennas());
  for (Index b = 0; b < num_rus(); ++b) out.segment(b * m, m).setConstant(pathloss(b, q));
  return out;
}

double NetworkGeometry::nearest_ru_distance(Point2D q) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rus_) best = std::min(best, distance(q, r));
  return best;
}

Index NetworkGeometry::locate_tile(Point2D p) const {
  auto [s, t] = torus_.to_lattice(torus_.wrap(p));
  int i = std::clamp(static_cast<int>(std::floor(s)), 0, params_.n1 - 1);
  int j = std::clamp(static_cast<int>(std::floor(t)), 0, params_.n2 - 1);
  const bool up = (s - i) + (t - j) < 1.0;
  return cell_to_tile_[static_cast<std::size_t>((j * params_.n1 + i) * 2 + (up ? 0 : 1))];
}

Point2D NetworkGeometry::tile_point(Index u, double a, double b) const {
  const auto& v = tile(u).vertices;
  return torus_.wrap(v[0] + a * (v[1] - v[0]) + b * (v[2] - v[0]));
}

Point2D NetworkGeometry::sample_in_tile(Index u, Rng& rng) const {
  double a = rng.uniform();
  double b = rng.uniform();
  if (a + b > 1.0) {
    a = 1.0 - a;
    b = 1.0 - b;
  }
  return tile_point(u, a, b);
}

PositionGrid NetworkGeometry::position_grid(Index u, int k) const {
  if (k < 1) throw ConfigError("grid subdivision order must be >= 1");
  PositionGrid grid;
  const double inv = 1.0 / k;
  for (int b = 0; b < k; ++b) {
    for (int a = 0; a + b <= k - 1; ++a) grid.points.push_back(tile_point(u, (a + 1.0 / 3.0) * inv, (b + 1.0 / 3.0) * inv));
  }
  for (int b = 0; b < k; ++b) {
    for (int a = 0; a + b <= k - 2; ++a) grid.points.push_back(tile_point(u, (a + 2.0 / 3.0) * inv, (b + 2.0 / 3.0) * inv));
  }
  grid.weights.assign(grid.points.size(), 1.0 / (static_cast<double>(k) * k));
  return grid;
}

RVector NetworkGeometry::mean_profile(Index u, int order) const {
  const PositionGrid g = position_grid(u, order);
  RVector acc = RVector::Zero(num_antennas());
  for (std::size_t i = 0; i < g.points.size(); ++i) acc += g.weights[i] * covariance_profile(g.points[i]);
  return acc;
}

Index NetworkGeometry::nearest_grid_point(const PositionGrid& grid, Point2D q0) const {
  if (grid.points.empty()) throw ConfigError("empty position grid");
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < grid.size(); ++i) {
    const double d = distance(grid.points[static_cast<std::size_t>(i)], q0);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

bool point_in_triangle(Point2D p, const std::array<Point2D, 3>& tri, double tol) {
  const Point2D e1 = tri[1] - tri[0];
  const Point2D e2 = tri[2] - tri[0];
  const Point2D d = p - tri[0];
  const double det = e1.x * e2.y - e1.y * e2.x;
  const double a = (d.x * e2.y - d.y * e2.x) / det;
  const double b = (e1.x * d.y - e1.y * d.x) / det;
  return a >= -tol && b >= -tol && a + b <= 1.0 + tol;
}

}  // namespace cfura
