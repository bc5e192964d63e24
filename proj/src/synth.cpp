#include "distinct/synth.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace distinct {
namespace {

constexpr int kStacks = 10;
constexpr int kSlices = 16;

void add_ellipsoid(Mesh& mesh, std::vector<std::uint8_t>& tags, const Vec3& center, const Vec3& semi, bool pod) {
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(center + Vec3{0, 0, semi.z});
  for (int i = 1; i < kStacks; ++i) {
    const double theta = std::numbers::pi * i / kStacks;
    for (int j = 0; j < kSlices; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / kSlices;
      mesh.vertices.push_back(center + Vec3{semi.x * std::sin(theta) * std::cos(phi),
                                            semi.y * std::sin(theta) * std::sin(phi), semi.z * std::cos(theta)});
    }
  }
  mesh.vertices.push_back(center - Vec3{0, 0, semi.z});
  const std::uint32_t bottom = static_cast<std::uint32_t>(mesh.vertices.size() - 1);
  const auto ring = [&](int i, int j) { return base + 1 + static_cast<std::uint32_t>((i - 1) * kSlices + (j % kSlices)); };
  const auto push = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    mesh.faces.push_back({a, b, c});
    tags.push_back(pod ? 1 : 0);
  };
  for (int j = 0; j < kSlices; ++j) push(base, ring(1, j), ring(1, j + 1));
  for (int i = 1; i + 1 < kStacks; ++i) {
    for (int j = 0; j < kSlices; ++j) {
      push(ring(i, j), ring(i + 1, j), ring(i + 1, j + 1));
      push(ring(i, j), ring(i + 1, j + 1), ring(i, j + 1));
    }
  }
  for (int j = 0; j < kSlices; ++j) push(ring(kStacks - 1, j), bottom, ring(kStacks - 1, j + 1));
}

void add_box(Mesh& mesh, std::vector<std::uint8_t>& tags, const Vec3& center, const Vec3& half) {
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  for (int k = 0; k < 8; ++k) {
    mesh.vertices.push_back(center + Vec3{(k & 1) ? half.x : -half.x, (k & 2) ? half.y : -half.y,
                                          (k & 4) ? half.z : -half.z});
  }
  static constexpr std::uint32_t quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                                {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    mesh.faces.push_back({base + q[0], base + q[1], base + q[2]});
    mesh.faces.push_back({base + q[0], base + q[2], base + q[3]});
    tags.push_back(0);
    tags.push_back(0);
  }
}

double jittered(double v, double rel, Rng& rng) { return v * (1.0 + rng.uniform(-rel, rel)); }

struct Instance {
  Vec3 body;
  double span, chord, thickness;
  Vec3 pod;
  std::vector<Vec3> pods;
};

bool plausible(const Instance& s) {
  for (std::size_t a = 0; a < s.pods.size(); ++a) {
    for (std::size_t b = a + 1; b < s.pods.size(); ++b) {
      // Bounding boxes must be separated along at least one axis.
      const Vec3 d = s.pods[a] - s.pods[b];
      if (std::abs(d.x) <= 2.0 * s.pod.x + 0.02 && std::abs(d.y) <= 2.0 * s.pod.y + 0.02 &&
          std::abs(d.z) <= 2.0 * s.pod.z + 0.02) {
        return false;
      }
    }
    const Vec3& p = s.pods[a];
    // Pods must not intersect the fuselage: compare against the body radius
    // at the pod's station with a pod-sized margin.
    const double t = std::clamp(p.x / s.body.x, -1.0, 1.0);
    const double local = s.body.y * std::sqrt(std::max(0.0, 1.0 - t * t));
    const double radial = std::hypot(p.y, p.z);
    if (radial - s.pod.y <= local + 0.01) return false;
    // Pods hanging under the wing must clear it.
    if (std::abs(p.y) <= s.span / 2 && std::abs(p.x) <= s.chord / 2 + s.pod.x &&
        p.z + s.pod.z >= -s.thickness / 2 && p.z - s.pod.z <= s.thickness / 2) {
      return false;
    }
  }
  return true;
}

}  // namespace

void ShapeFamilySpec::validate() const {
  if (pod_placement.size() != pod_count) {
    throw std::invalid_argument("family '" + family_name + "': pod_count does not match placements");
  }
  const double bx = 2.0 * std::max(body_semi_axes.x, wing_span / 2);
  for (const Vec3& p : pod_placement) {
    if (std::abs(p.x) > bx || std::abs(p.y) > bx || std::abs(p.z) > bx) {
      throw std::invalid_argument("family '" + family_name + "': pod placement outside twice the body box");
    }
  }
  if (!(body_semi_axes.x > 0 && body_semi_axes.y > 0 && body_semi_axes.z > 0 && wing_span > 0 && wing_chord > 0 &&
        wing_thickness > 0 && pod_semi_axes.x > 0 && pod_semi_axes.y > 0 && pod_semi_axes.z > 0)) {
    throw std::invalid_argument("family '" + family_name + "': dimensions must be positive");
  }
}

std::vector<std::string> Dataset::family_names() const {
  std::set<std::string> names;
  for (const auto& r : records) names.insert(r.family_name);
  return {names.begin(), names.end()};
}

std::vector<std::size_t> Dataset::family_labels() const {
  const auto names = family_names();
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), r.family_name) - names.begin()));
  }
  return out;
}

std::vector<DatasetRecord> generate_family(const ShapeFamilySpec& spec, std::size_t count, std::size_t master_points,
                                           Rng& rng) {
  spec.validate();
  std::vector<DatasetRecord> out;
  out.reserve(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    Instance s;
    bool ok = false;
    for (int attempt = 0; attempt < 16 && !ok; ++attempt) {
      const double jr = spec.size_jitter;
      s.body = {jittered(spec.body_semi_axes.x, jr, rng), jittered(spec.body_semi_axes.y, jr, rng),
                jittered(spec.body_semi_axes.z, jr, rng)};
      s.span = jittered(spec.wing_span, jr, rng);
      s.chord = jittered(spec.wing_chord, jr, rng);
      s.thickness = spec.wing_thickness;
      const double ps = 1.0 + rng.uniform(-jr, jr) * 2.0;
      s.pod = spec.pod_semi_axes * ps;
      s.pods.clear();
      const double pj = spec.placement_jitter;
      for (const Vec3& p : spec.pod_placement) {
        s.pods.push_back(p + Vec3{rng.uniform(-pj, pj), rng.uniform(-pj, pj), rng.uniform(-pj, pj) * 0.3});
      }
      ok = plausible(s);
    }
    if (!ok) throw std::runtime_error("generate_family: could not place pods for '" + spec.family_name + "'");

    DatasetRecord rec;
    rec.family_name = spec.family_name;
    char id[64];
    std::snprintf(id, sizeof id, "%s-%04zu", spec.family_name.c_str(), idx);
    rec.shape_id = id;

    Mesh& mesh = rec.mesh;
    add_ellipsoid(mesh, rec.face_is_pod, {0, 0, 0}, s.body, false);
    add_box(mesh, rec.face_is_pod, {0.05 * s.body.x, 0, 0}, {s.chord / 2, s.span / 2, s.thickness / 2});
    const double tail_x = -0.85 * s.body.x;
    add_box(mesh, rec.face_is_pod, {tail_x, 0, 0.5 * s.body.z + 0.1}, {0.08, s.thickness / 2, 0.12});
    add_box(mesh, rec.face_is_pod, {tail_x, 0, 0.5 * s.body.z}, {0.07, 0.25, s.thickness / 2});
    for (const Vec3& p : s.pods) add_ellipsoid(mesh, rec.face_is_pod, p, s.pod, true);
    validate(mesh);

    SurfaceSample sample = surface_sample_faces(mesh, master_points, rng);
    const Vec3 c = centroid(sample.cloud);
    double r = 0.0;
    for (const Vec3& p : sample.cloud.points) r = std::max(r, distance(p, c));
    rec.master_cloud = normalize_unit_sphere(sample.cloud);
    rec.master_cloud.shape_id = rec.shape_id;
    for (Vec3& v : mesh.vertices) v = (v - c) * (1.0 / r);
    rec.substructure_mask.reserve(master_points);
    for (std::uint32_t f : sample.face) rec.substructure_mask.push_back(rec.face_is_pod[f]);
    out.push_back(std::move(rec));
  }
  return out;
}

Dataset build_dataset(const std::vector<FamilyCount>& specs, std::size_t n, std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto& [spec, count] : specs) total += count;
  if (total < 2) throw std::invalid_argument("build_dataset: need at least two shapes");
  if (n < 8) throw std::invalid_argument("build_dataset: need N >= 8");
  Dataset ds;
  ds.points_per_shape = n;
  for (std::size_t f = 0; f < specs.size(); ++f) {
    Rng rng(derive_seed(seed, {hash_string(specs[f].first.family_name), f}));
    auto recs = generate_family(specs[f].first, specs[f].second, 4 * n, rng);
    for (auto& r : recs) ds.records.push_back(std::move(r));
  }
  Rng shuffle(derive_seed(seed, {hash_string("shuffle")}));
  for (std::size_t i = ds.records.size(); i > 1; --i) std::swap(ds.records[i - 1], ds.records[shuffle.below(i)]);
  return ds;
}

ResampledView resample_view(const DatasetRecord& record, std::size_t n, Rng& rng, const ResampleOptions& opts) {
  const std::size_t total = record.master_cloud.size();
  if (n > total) {
    throw std::invalid_argument("resample_view: requested " + std::to_string(n) + " points from a master cloud of " +
                                std::to_string(total));
  }
  std::vector<std::size_t> perm(total);
  for (std::size_t i = 0; i < total; ++i) perm[i] = i;
  for (std::size_t i = 0; i < n; ++i) std::swap(perm[i], perm[i + rng.below(total - i)]);
  ResampledView view;
  view.cloud.shape_id = record.shape_id;
  view.cloud.points.reserve(n);
  view.source.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
  for (std::size_t i : view.source) {
    Vec3 p = record.master_cloud.points[i];
    if (opts.jitter_sigma > 0.0) {
      Vec3 j{opts.jitter_sigma * rng.normal(), opts.jitter_sigma * rng.normal(), opts.jitter_sigma * rng.normal()};
      const double len = norm(j);
      if (len > opts.jitter_clip) j *= len > 0.0 ? opts.jitter_clip / len : 0.0;
      p += j;
    }
    view.cloud.points.push_back(p);
  }
  return view;
}

namespace {

ShapeFamilySpec base_spec(std::string name) {
  ShapeFamilySpec s;
  s.family_name = std::move(name);
  return s;
}

// Pod centers hang just clear of the wing's underside.
constexpr double kUnderWing = -0.177;

}  // namespace

ShapeFamilySpec twin_pod_spec() {
  ShapeFamilySpec s = base_spec("twin-pod");
  s.pod_placement = {{0.1, 0.30, kUnderWing}, {0.1, -0.30, kUnderWing}};
  s.pod_count = s.pod_placement.size();
  return s;
}

ShapeFamilySpec quad_pod_spec() {
  ShapeFamilySpec s = base_spec("quad-pod");
  s.pod_placement = {{0.1, 0.30, kUnderWing}, {0.1, -0.30, kUnderWing}, {0.05, 0.68, kUnderWing}, {0.05, -0.68, kUnderWing}};
  s.pod_count = s.pod_placement.size();
  return s;
}

ShapeFamilySpec tail_pod_spec() {
  ShapeFamilySpec s = base_spec("tail-pod");
  s.pod_placement = {{-0.5, 0.32, 0.06}, {-0.5, -0.32, 0.06}};
  s.pod_count = s.pod_placement.size();
  return s;
}

std::vector<FamilyCount> preset(const std::string& name, std::size_t count) {
  if (name == "twin-vs-quad") return {{twin_pod_spec(), count}, {quad_pod_spec(), count}};
  if (name == "quad-vs-tail") return {{quad_pod_spec(), count}, {tail_pod_spec(), count}};
  throw std::invalid_argument("unknown preset '" + name + "' (expected twin-vs-quad or quad-vs-tail)");
}

std::uint64_t dataset_digest(const Dataset& ds) {
  std::uint64_t h = mix64(ds.points_per_shape);
  const auto fold = [&h](double v) { h = mix64(h ^ std::bit_cast<std::uint64_t>(v)); };
  for (const auto& r : ds.records) {
    h = mix64(h ^ hash_string(r.shape_id));
    for (const Vec3& v : r.mesh.vertices) { fold(v.x); fold(v.y); fold(v.z); }
    for (const auto& f : r.mesh.faces) h = mix64(h ^ (std::uint64_t{f[0]} << 40 ^ std::uint64_t{f[1]} << 20 ^ f[2]));
    for (const Vec3& v : r.master_cloud.points) { fold(v.x); fold(v.y); fold(v.z); }
    for (std::uint8_t m : r.substructure_mask) h = mix64(h ^ m);
  }
  return h;
}

}  // namespace distinct
