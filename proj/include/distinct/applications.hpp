#pragma once

// Downstream uses of the distinctiveness field: retrieval with a
// distinctiveness-guided global feature, adaptive Poisson-disk sampling, and
// best-view selection.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distinct/distinctiveness.hpp"
#include "distinct/geometry.hpp"
#include "distinct/pipeline.hpp"
#include "distinct/tensor.hpp"

namespace distinct {

inline constexpr double kDefaultDeltaD = 0.7;

/// Field of an arbitrary cloud: normalized to the unit sphere, encoded at its
/// own size, max-reduced and min-max scaled. Point order is preserved.
DistinctivenessField detect(const Checkpoint& ckpt, const PointCloud& pc);

/// Mean of the rows of F^r with d_i > delta_d. When no row qualifies, the
/// rows in the top decile of d are used instead (with a warning).
template <typename T>
std::vector<double> distinctive_global_feature(const Tensor<T>& refined, std::span<const double> d,
                                               double delta_d = kDefaultDeltaD);

struct RetrievalEntry {
  std::string shape_id;
  std::vector<double> h;  ///< distinctiveness-guided feature
  std::vector<double> g;  ///< unit global feature
};

struct RetrievalIndex {
  std::vector<RetrievalEntry> entries;
  double delta_d = kDefaultDeltaD;
};

/// h and g of one cloud under the checkpoint.
RetrievalEntry describe(const Checkpoint& ckpt, const PointCloud& pc, double delta_d = kDefaultDeltaD);

/// Index over canonical views of every record.
RetrievalIndex build_index(const Checkpoint& ckpt, const Dataset& dataset, double delta_d = kDefaultDeltaD);

enum class RetrievalFeature { h, g };

struct RetrievalHit {
  std::string shape_id;
  double distance = 0.0;
};

/// Ascending Euclidean distance, ties by id; at most top_k hits.
std::vector<RetrievalHit> retrieve(const RetrievalIndex& index, std::span<const double> query, std::size_t top_k,
                                   RetrievalFeature feature = RetrievalFeature::h);

/// Greedy dart throwing over a seeded permutation: p is accepted when every
/// accepted q has |p - q| >= min(r(p), r(q)), r = r_max - (r_max - r_min) d.
/// Returns accepted indices in ascending order.
std::vector<std::size_t> adaptive_poisson_sample(const PointCloud& pc, std::span<const double> d, double r_min,
                                                 double r_max, Rng& rng);

/// Fixed-radius dart throwing with the same permutation rule.
std::vector<std::size_t> poisson_disk_sample(const PointCloud& pc, double radius, Rng& rng);

/// Orthographic depth-buffer visibility along -direction on a resolution^2
/// grid. Each point covers the cells within resolution / sqrt(n) of its own;
/// a point is visible when its depth is within 1% of the scene diameter plus
/// the footprint radius of its cell's minimum.
std::vector<std::uint8_t> visible_points(const PointCloud& pc, const Vec3& direction, double camera_distance,
                                         std::size_t resolution = 64);

struct Box {
  Vec3 lo, hi;
  bool contains(const Vec3& p) const;
  Vec3 center() const { return (lo + hi) * 0.5; }
};

struct ViewScore {
  std::size_t index = 0;  ///< position in the candidate lattice
  Vec3 direction;         ///< unit, z >= 0
  double camera_distance = 0.0;
  Vec3 target;
  double score = -1.0;    ///< mean d over visible points; -1 when none are visible
  std::size_t visible = 0;
};

/// n directions on the upper hemisphere (Fibonacci lattice).
std::vector<Vec3> hemisphere_directions(std::size_t n);

/// Candidate views ranked by descending score, ties by lattice index.
std::vector<ViewScore> select_views(const PointCloud& scene, std::span<const double> d, std::size_t n_views = 50,
                                    const std::optional<Box>& focus = std::nullopt, std::size_t resolution = 64);

/// Field over a scene from overlapping patches of the given diameter, each
/// resampled to N points, normalized, encoded, and scattered back.
std::vector<double> scene_distinctiveness(const PointCloud& scene, const Checkpoint& ckpt, double patch_diameter,
                                          std::uint64_t seed = 0);

}  // namespace distinct
