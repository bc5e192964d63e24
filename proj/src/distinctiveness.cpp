#include "distinct/distinctiveness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace distinct {

DistinctivenessField min_max_field(std::vector<double> raw, double collapse) {
  DistinctivenessField out;
  if (raw.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi - lo;
  if (!std::isfinite(range) || range <= collapse) {
    out.values.assign(raw.size(), 0.0);
    out.degenerate = true;
    return out;
  }
  out.values = std::move(raw);
  for (double& v : out.values) v = std::clamp((v - lo) / range, 0.0, 1.0);
  return out;
}

template <typename T>
DistinctivenessField extract(const Tensor<T>& refined, Reduction reduction) {
  const std::size_t n = refined.rows(), m = refined.cols();
  if (m == 0) throw ShapeError("extract: feature matrix has no channels");
  std::vector<double> raw(n);
  std::vector<double> row(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m; ++c) row[c] = refined(i, c);
    switch (reduction) {
      case Reduction::max:
        raw[i] = *std::max_element(row.begin(), row.end());
        break;
      case Reduction::mean: {
        double s = 0.0;
        for (double v : row) s += v;
        raw[i] = s / static_cast<double>(m);
        break;
      }
      case Reduction::l2: {
        double s = 0.0;
        for (double v : row) s += v * v;
        raw[i] = std::sqrt(s);
        break;
      }
      case Reduction::top3_mean: {
        const std::size_t k = std::min<std::size_t>(3, m);
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end(), std::greater<>());
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += row[c];
        raw[i] = s / static_cast<double>(k);
        break;
      }
    }
  }
  return min_max_field(std::move(raw));
}

DistinctivenessField project_to_mesh(const Mesh& mesh, const PointCloud& pc, std::span<const double> d,
                                     std::size_t k) {
  if (d.size() != pc.size()) throw std::invalid_argument("project_to_mesh: field length differs from cloud size");
  if (pc.empty()) throw std::invalid_argument("project_to_mesh: empty cloud");
  k = std::min(k, pc.size());
  std::vector<double> raw(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const std::vector<std::size_t> nn = k_nearest(pc, mesh.vertices[v], k);
    double wsum = 0.0, acc = 0.0;
    for (std::size_t i : nn) {
      const double w = 1.0 / (distance(mesh.vertices[v], pc.points[i]) + 1e-12);
      wsum += w;
      acc += w * d[i];
    }
    raw[v] = acc / wsum;
  }
  DistinctivenessField out = min_max_field(std::move(raw));
  out.shape_id = pc.shape_id;
  return out;
}

std::vector<std::size_t> threshold_regions(std::span<const double> d, double d_t) {
  if (!(d_t >= 0.0 && d_t < 1.0)) throw std::invalid_argument("threshold_regions: d_t must be in [0, 1)");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > d_t) out.push_back(i);
  return out;
}

template DistinctivenessField extract<float>(const Tensor<float>&, Reduction);
template DistinctivenessField extract<double>(const Tensor<double>&, Reduction);

}  // namespace distinct
