#include <cmath>

#include "distinct/applications.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace distinct;

namespace {

PointCloud sphere_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p{rng.normal(), rng.normal(), rng.normal()};
    pc.points.push_back(p * (1.0 / norm(p)));
  }
  return pc;
}

// Minimum-spacing oracle over all pairs.
bool spacing_holds(const PointCloud& pc, const std::vector<std::size_t>& s, const std::vector<double>& radius) {
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = a + 1; b < s.size(); ++b)
      if (distance(pc.points[s[a]], pc.points[s[b]]) < std::min(radius[s[a]], radius[s[b]])) return false;
  return true;
}

}  // namespace

TEST_SUITE("applications") {

TEST_CASE("distinctive global feature") {
  Rng rng(1);
  Tensor<double> f = Tensor<double>::matrix(20, 5);
  for (double& v : f.values()) v = rng.uniform(-1, 1);
  std::vector<double> d(20);
  for (double& v : d) v = rng.uniform();

  SUBCASE("an all-inclusive threshold gives the row mean") {
    const auto h = distinctive_global_feature(f, d, -1.0);
    for (std::size_t c = 0; c < 5; ++c) {
      double m = 0.0;
      for (std::size_t i = 0; i < 20; ++i) m += f(i, c) / 20.0;
      CHECK(h[c] == doctest::Approx(m));
    }
  }
  SUBCASE("only rows above the threshold contribute") {
    const auto h = distinctive_global_feature(f, d, 0.7);
    std::vector<double> ref(5, 0.0);
    double cnt = 0.0;
    for (std::size_t i = 0; i < 20; ++i)
      if (d[i] > 0.7) {
        cnt += 1.0;
        for (std::size_t c = 0; c < 5; ++c) ref[c] += f(i, c);
      }
    for (std::size_t c = 0; c < 5; ++c) CHECK(h[c] == doctest::Approx(ref[c] / cnt));
  }
  SUBCASE("empty selection falls back to the top decile") {
    std::vector<double> flat(20, 0.1);
    flat[7] = 0.5;
    flat[2] = 0.4;
    const auto h = distinctive_global_feature(f, flat, 0.9);
    for (std::size_t c = 0; c < 5; ++c) CHECK(h[c] == doctest::Approx((f(7, c) + f(2, c)) / 2.0));
  }
}

TEST_CASE("retrieval ordering") {
  RetrievalIndex index;
  index.entries = {{"b", {1, 0}, {0, 1}}, {"a", {1, 0}, {1, 0}}, {"c", {0, 0}, {0, 0}}};
  const std::vector<double> q = {1, 0};
  const auto hits = retrieve(index, q, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].shape_id == "a");  // tie at distance 0 broken by id
  CHECK(hits[1].shape_id == "b");
  const auto by_g = retrieve(index, q, 3, RetrievalFeature::g);
  CHECK(by_g[0].shape_id == "a");
  CHECK(by_g[1].shape_id == "c");
  const std::vector<double> wrong = {1, 0, 0};
  CHECK_THROWS_AS(retrieve(index, wrong, 1), std::invalid_argument);
}

TEST_CASE("adaptive Poisson sampling keeps the minimum spacing") {
  const PointCloud pc = testing::random_cloud(600, 2);
  std::vector<double> d(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) d[i] = 0.5 * (pc.points[i].x + 1.0);
  const double r_min = 0.08, r_max = 0.3;
  Rng rng(3);
  const auto s = adaptive_poisson_sample(pc, d, r_min, r_max, rng);
  std::vector<double> radius(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) radius[i] = r_max - (r_max - r_min) * d[i];
  CHECK(spacing_holds(pc, s, radius));
  // Denser where d is high.
  std::size_t high = 0;
  for (std::size_t i : s) high += pc.points[i].x > 0;
  CHECK(2 * high > s.size());

  CHECK_THROWS_AS(adaptive_poisson_sample(pc, d, 0.0, 0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(adaptive_poisson_sample(pc, d, 0.2, 0.1, rng), std::invalid_argument);
}

TEST_CASE("constant field reduces to fixed-radius dart throwing") {
  const PointCloud pc = testing::random_cloud(500, 4);
  for (double level : {0.0, 0.3, 1.0}) {
    const std::vector<double> d(pc.size(), level);
    Rng a(9), b(9);
    const auto adaptive = adaptive_poisson_sample(pc, d, 0.1, 0.25, a);
    const auto fixed = poisson_disk_sample(pc, 0.25 - (0.25 - 0.1) * level, b);
    CHECK(adaptive == fixed);
  }
}

TEST_CASE("view directions cover the upper hemisphere") {
  const auto dirs = hemisphere_directions(50);
  REQUIRE(dirs.size() == 50);
  Vec3 mean;
  for (const Vec3& v : dirs) {
    CHECK(norm(v) == doctest::Approx(1.0));
    CHECK(v.z > 0.0);
    mean += v;
  }
  mean = mean * (1.0 / 50.0);
  CHECK(std::abs(mean.x) < 0.05);
  CHECK(std::abs(mean.y) < 0.05);
  CHECK(mean.z == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("visibility sees the near side of a sphere") {
  const PointCloud pc = sphere_cloud(2000, 5);
  const auto vis = visible_points(pc, {0, 0, 1}, 4.0, 64);
  std::size_t near_seen = 0, far_seen = 0, near = 0, far = 0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double z = pc.points[i].z;
    if (z > 0.5) { ++near; near_seen += vis[i]; }
    if (z < -0.3) { ++far; far_seen += vis[i]; }
  }
  CHECK(near_seen > 0.8 * near);
  CHECK(far_seen < 0.02 * far);
}

TEST_CASE("view selection faces the distinctive side") {
  const PointCloud pc = sphere_cloud(2000, 6);
  std::vector<double> d(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) d[i] = pc.points[i].x > 0.5 ? 1.0 : 0.0;
  const auto views = select_views(pc, d, 50);
  CHECK(views[0].direction.x > 0.0);
  CHECK(views[0].score >= views.back().score);

  const std::vector<double> flat(pc.size(), 0.4);
  const auto same = select_views(pc, flat, 50);
  CHECK(same.front().score - same.back().score < 1e-6);

  Box focus{{0.5, -1, -1}, {1, 1, 1}};
  const auto focused = select_views(pc, d, 10, focus);
  CHECK(focused[0].target.x == doctest::Approx(0.75));
}

}  // TEST_SUITE
