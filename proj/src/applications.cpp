#include "distinct/applications.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "distinct/distinctiveness.hpp"
#include "distinct/log.hpp"
#include "distinct/parallel.hpp"

namespace distinct {

template <typename T>
std::vector<double> distinctive_global_feature(const Tensor<T>& refined, std::span<const double> d, double delta_d) {
  const std::size_t n = refined.rows(), m = refined.cols();
  if (d.size() != n) throw std::invalid_argument("distinctive_global_feature: field length differs from row count");
  if (n == 0) throw std::invalid_argument("distinctive_global_feature: empty feature matrix");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > delta_d) rows.push_back(i);
  if (rows.empty()) {
    log_warning("distinctive_global_feature: no point above the threshold; using the top decile");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
    rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>((n + 9) / 10));
    std::sort(rows.begin(), rows.end());
  }
  std::vector<double> h(m, 0.0);
  for (std::size_t i : rows)
    for (std::size_t c = 0; c < m; ++c) h[c] += refined(i, c);
  for (double& v : h) v /= static_cast<double>(rows.size());
  return h;
}

DistinctivenessField detect(const Checkpoint& ckpt, const PointCloud& pc) {
  const ShapeForward<float> fw = forward_shape(ckpt.params, normalize_unit_sphere(pc), ckpt.config.effective_encoder());
  DistinctivenessField field = extract(fw.refined.values);
  field.shape_id = pc.shape_id;
  return field;
}

RetrievalEntry describe(const Checkpoint& ckpt, const PointCloud& pc, double delta_d) {
  const ShapeForward<float> fw = forward_shape(ckpt.params, pc, ckpt.config.effective_encoder());
  RetrievalEntry e;
  e.shape_id = pc.shape_id;
  e.g.assign(fw.global.vector.values().begin(), fw.global.vector.values().end());
  e.h = distinctive_global_feature(fw.refined.values, extract(fw.refined.values).values, delta_d);
  return e;
}

RetrievalIndex build_index(const Checkpoint& ckpt, const Dataset& dataset, double delta_d) {
  RetrievalIndex index;
  index.delta_d = delta_d;
  index.entries.resize(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t j) {
    index.entries[j] = describe(ckpt, canonical_view(dataset.records[j], ckpt.config.points), delta_d);
    index.entries[j].shape_id = dataset.records[j].shape_id;
  });
  return index;
}

std::vector<RetrievalHit> retrieve(const RetrievalIndex& index, std::span<const double> query, std::size_t top_k,
                                   RetrievalFeature feature) {
  if (index.entries.empty()) throw std::invalid_argument("retrieve: empty index");
  std::vector<RetrievalHit> hits;
  for (const RetrievalEntry& e : index.entries) {
    const std::vector<double>& v = feature == RetrievalFeature::h ? e.h : e.g;
    if (v.size() != query.size()) throw std::invalid_argument("retrieve: query width differs from index");
    double s = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c) s += (v[c] - query[c]) * (v[c] - query[c]);
    hits.push_back({e.shape_id, std::sqrt(s)});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.shape_id < b.shape_id;
  });
  if (hits.size() > top_k) hits.resize(top_k);
  return hits;
}

namespace {

template <typename RadiusFn>
std::vector<std::size_t> dart_throw(const PointCloud& pc, Rng& rng, RadiusFn radius) {
  std::vector<std::size_t> order(pc.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::size_t> accepted;
  for (std::size_t p : order) {
    const double rp = radius(p);
    bool ok = true;
    for (std::size_t q : accepted) {
      if (distance(pc.points[p], pc.points[q]) < std::min(rp, radius(q))) {
        ok = false;
        break;
      }
    }
    if (ok) accepted.push_back(p);
  }
  std::sort(accepted.begin(), accepted.end());
  return accepted;
}

}  // namespace

std::vector<std::size_t> adaptive_poisson_sample(const PointCloud& pc, std::span<const double> d, double r_min,
                                                 double r_max, Rng& rng) {
  if (!(r_min > 0.0) || r_max < r_min) throw std::invalid_argument("adaptive_poisson_sample: need 0 < r_min <= r_max");
  if (d.size() != pc.size()) throw std::invalid_argument("adaptive_poisson_sample: field length differs from cloud");
  return dart_throw(pc, rng, [&](std::size_t i) { return r_max - (r_max - r_min) * d[i]; });
}

std::vector<std::size_t> poisson_disk_sample(const PointCloud& pc, double radius, Rng& rng) {
  if (!(radius > 0.0)) throw std::invalid_argument("poisson_disk_sample: radius must be positive");
  return dart_throw(pc, rng, [&](std::size_t) { return radius; });
}

std::vector<std::uint8_t> visible_points(const PointCloud& pc, const Vec3& direction, double camera_distance,
                                         std::size_t resolution) {
  if (resolution < 16) throw std::invalid_argument("visible_points: resolution must be at least 16");
  const double len = norm(direction);
  if (!(len > 0.0)) throw std::invalid_argument("visible_points: zero view direction");
  (void)camera_distance;  // orthographic: only the direction matters
  const Vec3 w = direction * (1.0 / len);
  const Vec3 helper = std::abs(w.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  Vec3 u = cross(helper, w);
  u = u * (1.0 / norm(u));
  const Vec3 v = cross(w, u);

  const std::size_t n = pc.size();
  std::vector<double> pu(n), pv(n), depth(n);
  double umin = std::numeric_limits<double>::infinity(), vmin = umin;
  double umax = -umin, vmax = -umin;
  for (std::size_t i = 0; i < n; ++i) {
    pu[i] = dot(pc.points[i], u);
    pv[i] = dot(pc.points[i], v);
    depth[i] = -dot(pc.points[i], w);  // smaller is nearer to the camera
    umin = std::min(umin, pu[i]);
    umax = std::max(umax, pu[i]);
    vmin = std::min(vmin, pv[i]);
    vmax = std::max(vmax, pv[i]);
  }
  const double extent = std::max({umax - umin, vmax - vmin, 1e-12});
  const double cell = extent / static_cast<double>(resolution);
  const auto cell_of = [&](std::size_t i) {
    const auto cu = std::min<std::size_t>(resolution - 1, static_cast<std::size_t>((pu[i] - umin) / cell));
    const auto cv = std::min<std::size_t>(resolution - 1, static_cast<std::size_t>((pv[i] - vmin) / cell));
    return cu * resolution + cv;
  };
  // Points are splatted over a footprint of about one sample spacing so a
  // sparse front surface still occludes what lies behind it.
  const auto splat = static_cast<std::ptrdiff_t>(
      std::ceil(static_cast<double>(resolution) / std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1)))));
  const auto res = static_cast<std::ptrdiff_t>(resolution);
  std::vector<double> zbuf(resolution * resolution, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::ptrdiff_t>(cell_of(i));
    const std::ptrdiff_t cu = c / res, cv = c % res;
    for (std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, cu - splat); a <= std::min(res - 1, cu + splat); ++a)
      for (std::ptrdiff_t b = std::max<std::ptrdiff_t>(0, cv - splat); b <= std::min(res - 1, cv + splat); ++b) {
        double& z = zbuf[static_cast<std::size_t>(a * res + b)];
        z = std::min(z, depth[i]);
      }
  }
  // Depth slack: 1% of the scene plus the splat footprint, so sloped surfaces
  // are not hidden by their own neighbours.
  const double eps = (n ? 0.01 * bounding_sphere_diameter(pc) : 0.0) + static_cast<double>(splat) * cell;
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) mask[i] = depth[i] <= zbuf[cell_of(i)] + eps;
  return mask;
}

bool Box::contains(const Vec3& p) const {
  return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
}

std::vector<Vec3> hemisphere_directions(std::size_t n) {
  std::vector<Vec3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return out;
}

std::vector<ViewScore> select_views(const PointCloud& scene, std::span<const double> d, std::size_t n_views,
                                    const std::optional<Box>& focus, std::size_t resolution) {
  validate(scene);
  if (d.size() != scene.size()) throw std::invalid_argument("select_views: field length differs from scene size");
  if (n_views == 0) throw std::invalid_argument("select_views: need at least one view");
  const Vec3 target = focus ? focus->center() : centroid(scene);
  const double cam = bounding_sphere_diameter(scene);  // twice the bounding radius
  const std::vector<Vec3> dirs = hemisphere_directions(n_views);
  std::vector<ViewScore> views(n_views);
  parallel_for(n_views, [&](std::size_t i) {
    ViewScore& vs = views[i];
    vs.index = i;
    vs.direction = dirs[i];
    vs.camera_distance = cam;
    vs.target = target;
    const std::vector<std::uint8_t> vis = visible_points(scene, dirs[i], cam, resolution);
    double sum = 0.0;
    for (std::size_t p = 0; p < scene.size(); ++p) {
      if (!vis[p] || (focus && !focus->contains(scene.points[p]))) continue;
      sum += d[p];
      ++vs.visible;
    }
    vs.score = vs.visible ? sum / static_cast<double>(vs.visible) : -1.0;
  });
  std::stable_sort(views.begin(), views.end(), [](const ViewScore& a, const ViewScore& b) { return a.score > b.score; });
  return views;
}

std::vector<double> scene_distinctiveness(const PointCloud& scene, const Checkpoint& ckpt, double patch_diameter,
                                          std::uint64_t seed) {
  validate(scene);
  if (!(patch_diameter > 0.0)) throw std::invalid_argument("scene_distinctiveness: patch diameter must be positive");
  const std::size_t n = ckpt.config.points;
  const double radius = 0.5 * patch_diameter;
  Vec3 lo = scene.points[0], hi = lo;
  for (const Vec3& p : scene.points) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  // Patch centers on a grid with half-diameter spacing, so patches overlap.
  const double step = radius;
  std::vector<Vec3> centers;
  const auto count = [&](double a, double b) { return static_cast<std::size_t>(std::floor((b - a) / step)) + 1; };
  const std::size_t nx = count(lo.x, hi.x), ny = count(lo.y, hi.y), nz = count(lo.z, hi.z);
  const Vec3 mid = (lo + hi) * 0.5;
  const Vec3 start = mid - Vec3{step * double(nx - 1), step * double(ny - 1), step * double(nz - 1)} * 0.5;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t k = 0; k < nz; ++k) centers.push_back(start + Vec3{step * double(i), step * double(j), step * double(k)});

  struct PatchOut {
    std::vector<std::size_t> members;
    std::vector<double> values;
  };
  std::vector<PatchOut> outs(centers.size());
  const EncoderConfig enc = ckpt.config.effective_encoder();
  parallel_for(centers.size(), [&](std::size_t c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < scene.size(); ++i)
      if (distance(scene.points[i], centers[c]) <= radius) members.push_back(i);
    if (members.size() < 8) return;
    Rng rng(derive_seed(seed, {c, members.size()}));
    // N points without replacement when possible, otherwise all members plus repeats.
    std::vector<std::size_t> pick = members;
    for (std::size_t i = pick.size(); i > 1; --i) std::swap(pick[i - 1], pick[rng.below(i)]);
    if (pick.size() >= n) {
      pick.resize(n);
    } else {
      while (pick.size() < n) pick.push_back(members[rng.below(members.size())]);
    }
    PointCloud patch;
    for (std::size_t i : pick) patch.points.push_back(scene.points[i]);
    PointCloud local;
    try {
      local = normalize_unit_sphere(patch);
    } catch (const std::invalid_argument&) {
      return;
    }
    const ShapeForward<float> fw = forward_shape(ckpt.params, local, enc);
    const std::vector<double> d = extract(fw.refined.values).values;
    // Every member takes the inverse-distance value of its 3 nearest samples.
    PointCloud sampled;
    sampled.points = patch.points;
    PatchOut& out = outs[c];
    out.members = members;
    for (std::size_t i : members) {
      const std::vector<std::size_t> nn = k_nearest(sampled, scene.points[i], 3);
      double wsum = 0.0, acc = 0.0;
      for (std::size_t s : nn) {
        const double w = 1.0 / (distance(scene.points[i], sampled.points[s]) + 1e-12);
        wsum += w;
        acc += w * d[s];
      }
      out.values.push_back(acc / wsum);
    }
  });
  std::vector<double> sum(scene.size(), 0.0);
  std::vector<std::size_t> hits(scene.size(), 0);
  for (const PatchOut& o : outs) {
    for (std::size_t k = 0; k < o.members.size(); ++k) {
      sum[o.members[k]] += o.values[k];
      ++hits[o.members[k]];
    }
  }
  std::vector<double> raw(scene.size(), 0.0);
  for (std::size_t i = 0; i < scene.size(); ++i)
    if (hits[i]) raw[i] = sum[i] / static_cast<double>(hits[i]);
  return min_max_field(std::move(raw)).values;
}

template std::vector<double> distinctive_global_feature<float>(const Tensor<float>&, std::span<const double>, double);
template std::vector<double> distinctive_global_feature<double>(const Tensor<double>&, std::span<const double>, double);

}  // namespace distinct
