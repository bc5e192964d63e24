#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "distinct/geometry.hpp"
#include "distinct/random.hpp"

namespace testing {

inline distinct::PointCloud random_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  distinct::Rng rng(seed);
  distinct::PointCloud pc;
  pc.shape_id = "random-" + std::to_string(seed);
  for (std::size_t i = 0; i < n; ++i) {
    pc.points.push_back({scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1)});
  }
  return pc;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testing
