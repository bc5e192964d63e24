#include "distinct/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "distinct/linalg.hpp"
#include "distinct/simd.hpp"

namespace distinct {
namespace {

struct Rot3 {
  double m[3][3];
  Vec3 apply(const Vec3& p) const {
    return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z, m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z};
  }
};

Rot3 multiply(const Rot3& a, const Rot3& b) {
  Rot3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r.m[i][j] += a.m[i][k] * b.m[k][j];
  return r;
}

// Rodrigues rotation about a unit axis.
Rot3 axis_angle(const Vec3& u, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {{{t * u.x * u.x + c, t * u.x * u.y - s * u.z, t * u.x * u.z + s * u.y},
           {t * u.x * u.y + s * u.z, t * u.y * u.y + c, t * u.y * u.z - s * u.x},
           {t * u.x * u.z - s * u.y, t * u.y * u.z + s * u.x, t * u.z * u.z + c}}};
}

// Indices ordered by (squared distance, index).
void sort_by_distance(std::vector<std::size_t>& idx, const std::vector<double>& d2) {
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
  });
}

}  // namespace

double Mesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * norm(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
}

void validate(const PointCloud& pc) {
  if (pc.empty()) throw std::invalid_argument("point cloud '" + pc.shape_id + "' is empty");
  for (const Vec3& p : pc.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw std::invalid_argument("point cloud '" + pc.shape_id + "' has a non-finite coordinate");
    }
  }
}

void validate(const Mesh& mesh) {
  const std::size_t v = mesh.vertices.size();
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (std::uint32_t i : mesh.faces[f]) {
      if (i >= v) throw std::invalid_argument("mesh face " + std::to_string(f) + " references vertex out of range");
    }
    if (!(mesh.face_area(f) > 0.0)) throw std::invalid_argument("mesh face " + std::to_string(f) + " is degenerate");
  }
}

Vec3 centroid(const PointCloud& pc) {
  Vec3 c;
  for (const Vec3& p : pc.points) c += p;
  return c * (1.0 / static_cast<double>(pc.size()));
}

PointCloud normalize_unit_sphere(const PointCloud& pc) {
  validate(pc);
  const Vec3 c = centroid(pc);
  double max_norm = 0.0;
  for (const Vec3& p : pc.points) max_norm = std::max(max_norm, norm(p - c));
  if (!(max_norm > 0.0)) throw std::invalid_argument("normalize_unit_sphere: all points coincide");
  PointCloud out{.points = {}, .shape_id = pc.shape_id};
  out.points.reserve(pc.size());
  const double inv = 1.0 / max_norm;
  for (const Vec3& p : pc.points) out.points.push_back((p - c) * inv);
  return out;
}

PointCloud augment(const PointCloud& pc, Rng& rng, const AugmentConfig& cfg) {
  Rot3 rot{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  if (cfg.rotate_up) rot = axis_angle({0, 0, 1}, rng.uniform(0.0, 2.0 * std::numbers::pi));
  if (cfg.max_tilt_deg > 0.0) {
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double tilt = rng.uniform(0.0, cfg.max_tilt_deg) * std::numbers::pi / 180.0;
    rot = multiply(axis_angle({std::cos(phi), std::sin(phi), 0.0}, tilt), rot);
  }
  const double lo = std::min(cfg.scale_min, cfg.scale_max);
  const double hi = std::max(cfg.scale_min, cfg.scale_max);
  const double scale = lo == hi ? lo : rng.uniform(lo, hi);
  Vec3 shift;
  if (cfg.shift > 0.0) {
    shift = {rng.uniform(-cfg.shift, cfg.shift), rng.uniform(-cfg.shift, cfg.shift),
             rng.uniform(-cfg.shift, cfg.shift)};
  }

  PointCloud out{.points = {}, .shape_id = pc.shape_id};
  out.points.reserve(pc.size());
  const double clip = std::max(0.0, cfg.jitter_clip);
  for (const Vec3& p : pc.points) {
    Vec3 q = rot.apply(p) * scale + shift;
    if (cfg.jitter_sigma > 0.0) {
      Vec3 j{cfg.jitter_sigma * rng.normal(), cfg.jitter_sigma * rng.normal(), cfg.jitter_sigma * rng.normal()};
      const double len = norm(j);
      if (len > clip) j *= (len > 0.0 ? clip / len : 0.0);
      q += j;
    }
    out.points.push_back(q);
  }
  return out;
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& pc, std::size_t k, std::size_t start) {
  const std::size_t n = pc.size();
  if (k == 0 || k > n) throw std::invalid_argument("farthest_point_sample: need 1 <= K <= N");
  if (start >= n) throw std::invalid_argument("farthest_point_sample: start index out of range");
  std::vector<std::size_t> picked;
  picked.reserve(k);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<double> d2(n);
  std::size_t current = start;
  for (std::size_t s = 0; s < k; ++s) {
    picked.push_back(current);
    const Vec3& c = pc.points[current];
    const double q[3] = {c.x, c.y, c.z};
    simd::sq_dist3(pc.xyz(), n, q, d2.data());
    std::size_t arg = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], d2[i]);
      if (best[i] > far) {
        far = best[i];
        arg = i;
      }
    }
    current = arg;
  }
  return picked;
}

GridIndex::GridIndex(const PointCloud& pc, double cell) : pc_(&pc), cell_(cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("GridIndex: cell size must be positive");
  const std::size_t n = pc.size();
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = cell_of(pc.points[i]);
    keys[i] = key(c[0], c[1], c[2]);
  }
  sorted_.resize(n);
  std::iota(sorted_.begin(), sorted_.end(), 0u);
  std::stable_sort(sorted_.begin(), sorted_.end(), [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
  for (std::uint32_t b = 0; b < n;) {
    std::uint32_t e = b;
    while (e < n && keys[sorted_[e]] == keys[sorted_[b]]) ++e;
    ranges_.emplace(keys[sorted_[b]], std::make_pair(b, e));
    b = e;
  }
}

std::array<std::int64_t, 3> GridIndex::cell_of(const Vec3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x / cell_)), static_cast<std::int64_t>(std::floor(p.y / cell_)),
          static_cast<std::int64_t>(std::floor(p.z / cell_))};
}

std::uint64_t GridIndex::key(std::int64_t i, std::int64_t j, std::int64_t k) {
  const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1fffffULL; };
  return (u(i) << 42) | (u(j) << 21) | u(k);
}

std::vector<std::size_t> GridIndex::radius_query(const Vec3& center, double r, std::size_t max_k) const {
  const PointCloud& pc = *pc_;
  const double r2 = r * r;
  const auto lo = cell_of(center - Vec3{r, r, r});
  const auto hi = cell_of(center + Vec3{r, r, r});
  std::vector<std::pair<double, std::size_t>> hits;
  for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
    for (std::int64_t j = lo[1]; j <= hi[1]; ++j) {
      for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
        const auto it = ranges_.find(key(i, j, k));
        if (it == ranges_.end()) continue;
        for (std::uint32_t s = it->second.first; s < it->second.second; ++s) {
          const std::size_t idx = sorted_[s];
          const Vec3 d = pc.points[idx] - center;
          const double dd = (d.x * d.x + d.y * d.y) + d.z * d.z;
          if (dd <= r2) hits.emplace_back(dd, idx);
        }
      }
    }
  }
  if (hits.empty()) return k_nearest(pc, center, 1);
  std::sort(hits.begin(), hits.end());
  if (hits.size() > max_k) hits.resize(max_k);
  std::vector<std::size_t> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.second);
  return out;
}

std::vector<std::size_t> radius_query(const PointCloud& pc, const Vec3& center, double r, std::size_t max_k) {
  const std::size_t n = pc.size();
  std::vector<double> d2(n);
  const double q[3] = {center.x, center.y, center.z};
  simd::sq_dist3(pc.xyz(), n, q, d2.data());
  std::vector<std::size_t> hits;
  const double r2 = r * r;
  for (std::size_t i = 0; i < n; ++i)
    if (d2[i] <= r2) hits.push_back(i);
  if (hits.empty()) return k_nearest(pc, center, 1);
  sort_by_distance(hits, d2);
  if (hits.size() > max_k) hits.resize(max_k);
  return hits;
}

std::vector<std::size_t> k_nearest(const PointCloud& pc, const Vec3& center, std::size_t k) {
  const std::size_t n = pc.size();
  k = std::min(k, n);
  std::vector<double> d2(n);
  const double q[3] = {center.x, center.y, center.z};
  simd::sq_dist3(pc.xyz(), n, q, d2.data());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
  idx.resize(k);
  return idx;
}

std::vector<double> surface_variation(const PointCloud& pc, std::size_t k) {
  if (k < 4) throw std::invalid_argument("estimate_curvature: need k >= 4");
  std::vector<double> out(pc.size(), 0.0);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto nb = k_nearest(pc, pc.points[i], k);
    Vec3 mean;
    for (std::size_t j : nb) mean += pc.points[j];
    mean *= 1.0 / static_cast<double>(nb.size());
    std::vector<double> cov(9, 0.0);
    for (std::size_t j : nb) {
      const Vec3 d = pc.points[j] - mean;
      const double v[3] = {d.x, d.y, d.z};
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) cov[a * 3 + b] += v[a] * v[b];
    }
    const SymmetricEigen eig = jacobi_eigen(cov, 3, 1e-14);
    const double l0 = std::max(0.0, eig.values[0]);
    const double sum = l0 + std::max(0.0, eig.values[1]) + std::max(0.0, eig.values[2]);
    out[i] = sum > 0.0 ? l0 / sum : 0.0;
  }
  return out;
}

std::vector<double> estimate_curvature(const PointCloud& pc, std::size_t k, double collapse_range) {
  std::vector<double> s = surface_variation(pc, k);
  const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
  const double lo = *mn, range = *mx - *mn;
  if (!(range > collapse_range)) return std::vector<double>(s.size(), 0.0);
  for (double& v : s) v = (v - lo) / range;
  return s;
}

double bounding_sphere_diameter(const PointCloud& pc) {
  validate(pc);
  const Vec3 c = centroid(pc);
  double r = 0.0;
  for (const Vec3& p : pc.points) r = std::max(r, distance(p, c));
  return 2.0 * r;
}

SurfaceSample surface_sample_faces(const Mesh& mesh, std::size_t n, Rng& rng) {
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("surface_sample: mesh has zero total area");
  SurfaceSample out;
  out.cloud.points.reserve(n);
  out.face.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = rng.uniform() * total;
    std::size_t f = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    f = std::min(f, mesh.faces.size() - 1);
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const auto& t = mesh.faces[f];
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    out.cloud.points.push_back(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
    out.face.push_back(static_cast<std::uint32_t>(f));
  }
  return out;
}

PointCloud surface_sample(const Mesh& mesh, std::size_t n, Rng& rng) { return surface_sample_faces(mesh, n, rng).cloud; }

PointCloud rotate_z(const PointCloud& pc, double angle) {
  const Rot3 r = axis_angle({0, 0, 1}, angle);
  PointCloud out{.points = {}, .shape_id = pc.shape_id};
  out.points.reserve(pc.size());
  for (const Vec3& p : pc.points) out.points.push_back(r.apply(p));
  return out;
}

}  // namespace distinct
