#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "distinct/geometry.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace distinct;

namespace {

std::vector<std::size_t> fps_oracle(const PointCloud& pc, std::size_t k, std::size_t start) {
  std::vector<std::size_t> out = {start};
  std::vector<double> mind(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) mind[i] = distance(pc.points[i], pc.points[start]);
  while (out.size() < k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pc.size(); ++i)
      if (mind[i] > mind[best]) best = i;
    out.push_back(best);
    for (std::size_t i = 0; i < pc.size(); ++i) mind[i] = std::min(mind[i], distance(pc.points[i], pc.points[best]));
  }
  return out;
}

std::vector<std::size_t> ball_oracle(const PointCloud& pc, const Vec3& c, double r, std::size_t max_k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < pc.size(); ++i) all.emplace_back(distance(pc.points[i], c), i);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (const auto& [d, i] : all)
    if (d <= r && out.size() < max_k) out.push_back(i);
  if (out.empty()) out.push_back(all.front().second);
  return out;
}

double variation_oracle(const PointCloud& pc, std::size_t i, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < pc.size(); ++j) all.emplace_back(distance(pc.points[j], pc.points[i]), j);
  std::sort(all.begin(), all.end());
  Eigen::MatrixXd x(k, 3);
  for (std::size_t r = 0; r < k; ++r) {
    const Vec3& p = pc.points[all[r].second];
    x.row(static_cast<Eigen::Index>(r)) << p.x, p.y, p.z;
  }
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::Matrix3d cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d ev = es.eigenvalues();
  return ev(0) / ev.sum();
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("normalization centers and scales to the unit sphere") {
  const PointCloud pc = normalize_unit_sphere(testing::random_cloud(200, 1, 5.0));
  const Vec3 c = centroid(pc);
  CHECK(norm(c) < 1e-12);
  double r = 0.0;
  for (const Vec3& p : pc.points) r = std::max(r, norm(p));
  CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bounding_sphere_diameter(pc) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("validation rejects bad input") {
  PointCloud pc = testing::random_cloud(4, 2);
  pc.points[1].y = std::nan("");
  CHECK_THROWS_AS(validate(pc), std::invalid_argument);
  CHECK_THROWS_AS(validate(PointCloud{}), std::invalid_argument);
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  CHECK_NOTHROW(validate(m));
  m.faces = {{0, 1, 3}};
  CHECK_THROWS_AS(validate(m), std::invalid_argument);
  m.faces = {{0, 1, 1}};
  CHECK_THROWS_AS(validate(m), std::invalid_argument);
}

TEST_CASE("augmentation") {
  const PointCloud pc = normalize_unit_sphere(testing::random_cloud(64, 3));
  Rng rng(9);
  CHECK(augment(pc, rng, AugmentConfig::identity()).points == pc.points);

  AugmentConfig rigid = AugmentConfig::identity();
  rigid.rotate_up = true;
  rigid.max_tilt_deg = 10.0;
  const PointCloud out = augment(pc, rng, rigid);
  REQUIRE(out.size() == pc.size());
  for (std::size_t i = 0; i < pc.size(); i += 7)
    for (std::size_t j = i + 1; j < pc.size(); j += 5)
      CHECK(distance(out.points[i], out.points[j]) == doctest::Approx(distance(pc.points[i], pc.points[j])).epsilon(1e-12));

  AugmentConfig jitter = AugmentConfig::identity();
  jitter.jitter_sigma = 0.5;
  jitter.jitter_clip = 0.05;
  const PointCloud j = augment(pc, rng, jitter);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3 d = j.points[i] - pc.points[i];
    CHECK(std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)}) <= 0.05 + 1e-15);
  }
}

TEST_CASE("farthest point sampling matches the greedy oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PointCloud pc = testing::random_cloud(150, seed);
    CHECK(farthest_point_sample(pc, 40, seed % 3) == fps_oracle(pc, 40, seed % 3));
  }
}

TEST_CASE("grid radius queries match brute force") {
  const PointCloud pc = testing::random_cloud(500, 11);
  const GridIndex grid(pc, 0.2);
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const Vec3 c{rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3)};
    const double r = rng.uniform(0.0, 0.5);
    const std::size_t k = 1 + rng.below(40);
    const auto expect = ball_oracle(pc, c, r, k);
    CHECK(grid.radius_query(c, r, k) == expect);
    CHECK(radius_query(pc, c, r, k) == expect);
  }
}

TEST_CASE("k nearest neighbors are sorted by distance then index") {
  PointCloud pc;
  pc.points = {{1, 0, 0}, {-1, 0, 0}, {0, 2, 0}, {0, 0, 0.5}};
  CHECK(k_nearest(pc, {0, 0, 0}, 3) == std::vector<std::size_t>{3, 0, 1});
}

TEST_CASE("surface variation agrees with an eigen-solver oracle") {
  const PointCloud pc = testing::random_cloud(120, 21);
  const auto sv = surface_variation(pc, 12);
  for (std::size_t i = 0; i < pc.size(); i += 9) CHECK(sv[i] == doctest::Approx(variation_oracle(pc, i, 12)).epsilon(1e-9));
}

TEST_CASE("curvature is rotation invariant and flat on a plane") {
  const PointCloud pc = testing::random_cloud(200, 8);
  const auto a = estimate_curvature(pc, 16);
  const auto b = estimate_curvature(rotate_z(pc, 1.234), 16);
  CHECK(testing::max_abs_diff(a, b) < 1e-5);

  PointCloud plane;
  Rng rng(4);
  for (int i = 0; i < 100; ++i) plane.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0});
  for (double v : surface_variation(plane, 10)) CHECK(v < 1e-12);
  for (double v : estimate_curvature(plane, 10)) CHECK(v == 0.0);
}

TEST_CASE("surface sampling is area weighted and lies on faces") {
  Mesh m;
  m.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};  // areas 1.5 and 0.5
  Rng rng(17);
  const std::size_t n = 10000;
  const SurfaceSample s = surface_sample_faces(m, n, rng);
  REQUIRE(s.cloud.size() == n);
  std::size_t first = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = s.cloud.points[i];
    if (s.face[i] == 0) {
      ++first;
      CHECK(p.z == doctest::Approx(0.0));
      CHECK(p.x / 3.0 + p.y <= 1.0 + 1e-12);
    } else {
      CHECK(p.z == doctest::Approx(1.0));
      CHECK(p.x + p.y <= 1.0 + 1e-12);
    }
    CHECK(p.x >= -1e-12);
    CHECK(p.y >= -1e-12);
  }
  const double expect = 0.75 * n, sigma = std::sqrt(n * 0.75 * 0.25);
  CHECK(std::abs(static_cast<double>(first) - expect) <= 3 * sigma);
}

}  // TEST_SUITE
