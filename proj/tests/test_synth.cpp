#include <algorithm>
#include <cmath>
#include <set>

#include "distinct/synth.hpp"
#include "doctest.h"

using namespace distinct;

namespace {

double pod_fraction(const std::vector<DatasetRecord>& recs) {
  double masked = 0.0, total = 0.0;
  for (const auto& r : recs) {
    masked += static_cast<double>(std::count(r.substructure_mask.begin(), r.substructure_mask.end(), 1));
    total += static_cast<double>(r.substructure_mask.size());
  }
  return masked / total;
}

double nn_distance(const PointCloud& pc, const Vec3& q) {
  double best = 1e300;
  for (const Vec3& p : pc.points) best = std::min(best, distance(p, q));
  return best;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("preset sizes") {
  const Dataset ds = build_dataset(preset("twin-vs-quad", 30), 256, 1);
  CHECK(ds.size() == 60);
  CHECK(ds.points_per_shape == 256);
  for (const auto& r : ds.records) {
    CHECK(r.master_cloud.size() == 1024);
    CHECK(r.substructure_mask.size() == 1024);
    CHECK(r.face_is_pod.size() == r.mesh.faces.size());
    CHECK_NOTHROW(validate(r.mesh));
  }
  CHECK(ds.family_names() == std::vector<std::string>{"quad-pod", "twin-pod"});
  const auto labels = ds.family_labels();
  CHECK(std::count(labels.begin(), labels.end(), 0) == 30);
  CHECK_THROWS_AS(preset("nope", 3), std::invalid_argument);
}

TEST_CASE("master clouds are normalized") {
  const Dataset ds = build_dataset(preset("quad-vs-tail", 3), 64, 2);
  for (const auto& r : ds.records) {
    double rmax = 0.0;
    for (const Vec3& p : r.master_cloud.points) rmax = std::max(rmax, norm(p));
    CHECK(rmax == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(norm(centroid(r.master_cloud)) < 1e-9);
  }
}

TEST_CASE("generation is deterministic") {
  const auto a = build_dataset(preset("twin-vs-quad", 4), 64, 7);
  const auto b = build_dataset(preset("twin-vs-quad", 4), 64, 7);
  const auto c = build_dataset(preset("twin-vs-quad", 4), 64, 8);
  CHECK(dataset_digest(a) == dataset_digest(b));
  CHECK(dataset_digest(a) != dataset_digest(c));
  CHECK(a.records[0].mesh.vertices == b.records[0].mesh.vertices);
}

TEST_CASE("pod fractions follow pod counts") {
  Rng r1(1), r2(2), r0(3);
  const auto twins = generate_family(twin_pod_spec(), 10, 1024, r1);
  const auto quads = generate_family(quad_pod_spec(), 10, 1024, r2);
  const double ratio = pod_fraction(quads) / pod_fraction(twins);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.2));

  ShapeFamilySpec bare = twin_pod_spec();
  bare.pod_count = 0;
  bare.pod_placement.clear();
  for (const auto& r : generate_family(bare, 2, 256, r0))
    CHECK(std::count(r.substructure_mask.begin(), r.substructure_mask.end(), 1) == 0);
}

TEST_CASE("pod points are separated from body points") {
  const Dataset ds = build_dataset(preset("twin-vs-quad", 2), 128, 3);
  for (const auto& r : ds.records) {
    PointCloud pod, body;
    for (std::size_t i = 0; i < r.master_cloud.size(); ++i)
      (r.substructure_mask[i] ? pod : body).points.push_back(r.master_cloud.points[i]);
    REQUIRE(!pod.empty());
    double gap = 1e300;
    for (const Vec3& p : pod.points) gap = std::min(gap, nn_distance(body, p));
    CHECK(gap > 0.0);
  }
}

TEST_CASE("resampled views") {
  const Dataset ds = build_dataset(preset("twin-vs-quad", 1), 64, 4);
  const DatasetRecord& rec = ds.records[0];
  Rng a(1);
  const ResampledView full = resample_view(rec, rec.master_cloud.size(), a, {0.0, 0.0});
  std::set<std::size_t> src(full.source.begin(), full.source.end());
  CHECK(src.size() == rec.master_cloud.size());
  for (std::size_t i = 0; i < full.source.size(); ++i) CHECK(full.cloud.points[i] == rec.master_cloud.points[full.source[i]]);

  Rng s1(5), s2(5), s3(6);
  const auto v1 = resample_view(rec, 64, s1), v2 = resample_view(rec, 64, s2), v3 = resample_view(rec, 64, s3);
  CHECK(v1.cloud.points == v2.cloud.points);
  CHECK(v1.cloud.points != v3.cloud.points);

  // Two jittered draws of the whole master set stay within spacing plus
  // jitter of each other.
  double spacing = 0.0;
  for (std::size_t i = 0; i < rec.master_cloud.size(); ++i) {
    double nn = 1e300;
    for (std::size_t j = 0; j < rec.master_cloud.size(); ++j)
      if (i != j) nn = std::min(nn, distance(rec.master_cloud.points[i], rec.master_cloud.points[j]));
    spacing = std::max(spacing, nn);
  }
  const double clip = std::sqrt(3.0) * 0.05;
  Rng h1(11), h2(12);
  const auto w1 = resample_view(rec, rec.master_cloud.size(), h1), w2 = resample_view(rec, rec.master_cloud.size(), h2);
  double hausdorff = 0.0;
  for (const Vec3& p : w1.cloud.points) hausdorff = std::max(hausdorff, nn_distance(w2.cloud, p));
  for (const Vec3& p : w2.cloud.points) hausdorff = std::max(hausdorff, nn_distance(w1.cloud, p));
  CHECK(hausdorff <= 2.0 * (spacing + clip));
  Rng big(8);
  CHECK_THROWS_AS(resample_view(rec, rec.master_cloud.size() + 1, big), std::invalid_argument);
}

}  // TEST_SUITE
