#pragma once

// Per-point distinctiveness from refined features, mesh projection and
// thresholding.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "distinct/geometry.hpp"
#include "distinct/tensor.hpp"

namespace distinct {

/// Per-row reduction of F^r; max is the default, the others are for experiments.
enum class Reduction { max, mean, l2, top3_mean };

struct DistinctivenessField {
  std::vector<double> values;  ///< in [0, 1]
  std::string shape_id;
  bool degenerate = false;     ///< raw range collapsed; values are all zero
};

/// Min-max normalization. A range below `collapse` (or non-finite) yields all
/// zeros with the degenerate flag.
DistinctivenessField min_max_field(std::vector<double> raw, double collapse = 1e-12);

template <typename T>
DistinctivenessField extract(const Tensor<T>& refined, Reduction reduction = Reduction::max);

/// Per-vertex inverse-distance average of d over the 3 nearest sampled points,
/// then min-max normalized. A vertex coincident with a sample takes its value.
DistinctivenessField project_to_mesh(const Mesh& mesh, const PointCloud& pc, std::span<const double> d,
                                     std::size_t k = 3);

/// Indices with d_i > d_t. Throws when d_t is outside [0, 1).
std::vector<std::size_t> threshold_regions(std::span<const double> d, double d_t);

}  // namespace distinct
