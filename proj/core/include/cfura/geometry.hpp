#pragma once

#include <array>
#include <span>
#include <vector>

#include "cfura/rng.hpp"
#include "cfura/types.hpp"

namespace cfura {

struct Point2D {
  double x = 0.0;  // km
  double y = 0.0;  // km
};

inline Point2D operator+(Point2D a, Point2D b) { return {a.x + b.x, a.y + b.y}; }
inline Point2D operator-(Point2D a, Point2D b) { return {a.x - b.x, a.y - b.y}; }
inline Point2D operator*(double s, Point2D a) { return {s * a.x, s * a.y}; }
double norm(Point2D p);

/// Periodic domain spanned by n1*b1 and n2*b2.
struct TorusMap {
  Point2D b1;
  Point2D b2;
  int n1 = 1;
  int n2 = 1;

  double area() const;
  /// Coordinates (s, t) with p = s*b1 + t*b2.
  std::array<double, 2> to_lattice(Point2D p) const;
  Point2D from_lattice(double s, double t) const;
  /// Representative with lattice coordinates in [0, n1) x [0, n2).
  Point2D wrap(Point2D p) const;
  /// Shortest displacement over the 3x3 nearest periodic images.
  Point2D displacement(Point2D from, Point2D to) const;
};

struct LocationTile {
  int id = 0;
  std::array<Point2D, 3> vertices;  // unwrapped; vertices[0] lies in the fundamental domain
  Point2D centroid;                 // wrapped
  double side = 0.0;
  int cell_i = 0;
  int cell_j = 0;
  bool upward = true;
};

/// Discrete position prior support Q_u with its mass function.
struct PositionGrid {
  std::vector<Point2D> points;
  std::vector<double> weights;

  Index size() const { return static_cast<Index>(points.size()); }
};

struct NetworkParams {
  double side_km = 0.1;
  int n1 = 4;
  int n2 = 3;
  int antennas_per_ru = 2;
  double pathloss_exponent = 3.67;
  double cutoff_km = 0.01357;
};

/// Toroidal triangular-lattice network: RUs on lattice vertices, one location per triangular face.
class NetworkGeometry {
 public:
  static NetworkGeometry build(const NetworkParams& params);

  const NetworkParams& params() const { return params_; }
  const TorusMap& torus() const { return torus_; }
  Index num_rus() const { return static_cast<Index>(rus_.size()); }
  Index antennas_per_ru() const { return params_.antennas_per_ru; }
  Index num_antennas() const { return num_rus() * antennas_per_ru(); }
  Index num_tiles() const { return static_cast<Index>(tiles_.size()); }
  std::span<const Point2D> ru_positions() const { return rus_; }
  std::span<const LocationTile> tiles() const { return tiles_; }
  const LocationTile& tile(Index u) const { return tiles_.at(static_cast<std::size_t>(u)); }

  double distance(Point2D p, Point2D q) const;
  /// gamma_b(q) = 1 / (1 + (d / d0)^rho).
  double pathloss(Index ru, Point2D q) const;
  /// Diagonal of Sigma(q) = diag(gamma_1..gamma_B) (x) I_M, length F.
  RVector covariance_profile(Point2D q) const;
  /// Distance to the closest RU.
  double nearest_ru_distance(Point2D q) const;

  /// Tile owning p (each torus point belongs to exactly one tile).
  Index locate_tile(Point2D p) const;
  /// Point v0 + a*(v1 - v0) + b*(v2 - v0) of tile u, wrapped.
  Point2D tile_point(Index u, double a, double b) const;
  Point2D sample_in_tile(Index u, Rng& rng) const;
  /// Centroids of the k^2 congruent sub-triangles, uniform weights.
  PositionGrid position_grid(Index u, int k) const;
  /// Average of covariance_profile over tile u by a fine centroid rule.
  RVector mean_profile(Index u, int order = 64) const;
  /// Index of the grid point at minimum torus distance; ties go to the smallest index.
  Index nearest_grid_point(const PositionGrid& grid, Point2D q0) const;

  /// Unique undirected lattice edges, counted by (vertex, direction).
  Index num_edges() const { return 3 * num_rus(); }

 private:
  NetworkParams params_;
  TorusMap torus_;
  std::vector<Point2D> rus_;
  std::vector<LocationTile> tiles_;
  // (cell_j * n1 + cell_i) * 2 + (upward ? 0 : 1) -> tile id
  std::vector<Index> cell_to_tile_;
};

bool point_in_triangle(Point2D p, const std::array<Point2D, 3>& tri, double tol = 0.0);

}  // namespace cfura
