#pragma once

// Point-cloud and mesh primitives: normalization, augmentation, neighborhood
// queries, sampling and curvature.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "distinct/random.hpp"

namespace distinct {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};
static_assert(sizeof(Vec3) == 3 * sizeof(double));

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

struct PointCloud {
  std::vector<Vec3> points;
  std::string shape_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  /// Interleaved xyz view for the SIMD distance kernels.
  const double* xyz() const { return reinterpret_cast<const double*>(points.data()); }
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  double face_area(std::size_t f) const;
};

/// Throws std::invalid_argument if empty or any coordinate is non-finite.
void validate(const PointCloud& pc);
/// Throws std::invalid_argument on out-of-range indices or zero-area faces.
void validate(const Mesh& mesh);

Vec3 centroid(const PointCloud& pc);

/// Centers on the centroid and scales so the farthest point has norm 1.
PointCloud normalize_unit_sphere(const PointCloud& pc);

struct AugmentConfig {
  bool rotate_up = true;        ///< uniform angle in [0, 2pi) about +z
  double max_tilt_deg = 10.0;   ///< extra tilt about a random horizontal axis
  double scale_min = 0.9;
  double scale_max = 1.1;
  double shift = 0.1;           ///< per-axis U[-shift, shift]
  double jitter_sigma = 0.01;
  double jitter_clip = 0.05;

  static AugmentConfig identity() {
    return {false, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0};
  }
};

/// Rotation, scale and shift applied to the whole cloud, then clipped
/// Gaussian jitter per coordinate.
PointCloud augment(const PointCloud& pc, Rng& rng, const AugmentConfig& cfg);

/// Greedy max-min ordering starting from `start`; ties go to the lowest index.
std::vector<std::size_t> farthest_point_sample(const PointCloud& pc, std::size_t k, std::size_t start = 0);

/// Uniform-grid hash over a point cloud for fixed-radius queries.
class GridIndex {
 public:
  GridIndex(const PointCloud& pc, double cell);

  /// Points with |p - center| <= r, sorted by (distance, index), truncated to
  /// max_k. Falls back to the single nearest point when the ball is empty.
  std::vector<std::size_t> radius_query(const Vec3& center, double r, std::size_t max_k) const;

 private:
  std::array<std::int64_t, 3> cell_of(const Vec3& p) const;
  static std::uint64_t key(std::int64_t i, std::int64_t j, std::int64_t k);

  const PointCloud* pc_;
  double cell_;
  std::vector<std::uint32_t> sorted_;
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> ranges_;
};

/// Brute-force reference of GridIndex::radius_query.
std::vector<std::size_t> radius_query(const PointCloud& pc, const Vec3& center, double r, std::size_t max_k);

/// k nearest points sorted by (distance, index).
std::vector<std::size_t> k_nearest(const PointCloud& pc, const Vec3& center, std::size_t k);

/// Raw surface-variation score lambda0 / (lambda0 + lambda1 + lambda2) per point,
/// from PCA over the k nearest neighbors (the point itself included).
std::vector<double> surface_variation(const PointCloud& pc, std::size_t k);

/// surface_variation min-max normalized to [0, 1]. A range below
/// `collapse_range` yields all zeros.
std::vector<double> estimate_curvature(const PointCloud& pc, std::size_t k, double collapse_range = 1e-3);

/// Twice the largest distance from the centroid.
double bounding_sphere_diameter(const PointCloud& pc);

struct SurfaceSample {
  PointCloud cloud;
  std::vector<std::uint32_t> face;  ///< source face per point
};

/// Area-weighted face choice, uniform barycentric placement.
SurfaceSample surface_sample_faces(const Mesh& mesh, std::size_t n, Rng& rng);
PointCloud surface_sample(const Mesh& mesh, std::size_t n, Rng& rng);

/// Rotation about +z by `angle` radians.
PointCloud rotate_z(const PointCloud& pc, double angle);

}  // namespace distinct
