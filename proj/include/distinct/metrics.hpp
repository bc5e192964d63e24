#pragma once

// Evaluation: coverage matching with FNE/FPE and WME, preference-based
// downsampling, assignment retention and label-agreement scores.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distinct/distinctiveness.hpp"
#include "distinct/geometry.hpp"
#include "distinct/pipeline.hpp"

namespace distinct {

struct CoverageResult {
  std::size_t covered = 0;                                   ///< N_c
  std::vector<std::pair<std::size_t, std::size_t>> matches;  ///< (ground-truth index, detected index)
  double r = 0.0;
  double diameter = 0.0;
};

/// One-to-one matching of ground truth `truth` (Q-hat) against `detected` (Q).
/// A detected point q may cover only its nearest truth point (ties to the lower
/// index) and only within r * D; candidate pairs are taken greedily in
/// ascending (distance, truth, detected) order.
CoverageResult match_coverage(std::span<const Vec3> truth, std::span<const Vec3> detected, double r, double diameter);

struct FneFpe {
  double fne = 0.0;
  double fpe = 0.0;
};

/// FNE = 1 - N_c / |Q-hat|, FPE = 1 - N_c / |Q|. Throws on an empty set.
FneFpe fne_fpe(std::span<const Vec3> truth, std::span<const Vec3> detected, double r, double diameter);

struct Region {
  std::vector<Vec3> points;
  Vec3 centroid() const;
};

struct RegionAnnotationSet {
  std::vector<std::vector<Region>> annotators;  ///< marked regions per annotator
  std::vector<Region> detected;
};

/// 1 - sum_k covered_k / sum_k marked_k. Throws when no annotator or no marked region.
double wme(std::span<const std::size_t> marked, std::span<const std::size_t> covered);

/// Region-level WME: each annotator's regions are matched against the detected
/// regions by centroid under the r * D rule.
double wme(const RegionAnnotationSet& set, double r, double diameter);

enum class PreferenceMode { distinctiveness, curvature, random };

std::string to_string(PreferenceMode mode);
PreferenceMode parse_preference(const std::string& text);

inline constexpr double kPreferenceFloor = 1e-3;

struct Downsample {
  PointCloud cloud;
  std::vector<std::size_t> indices;  ///< ascending
};

/// K points without replacement, each draw proportional to score + 1e-3 among
/// the remaining points. Scores: d, curvature, or uniform. Throws when K > N.
Downsample downsample_with_preference(const PointCloud& pc, std::span<const double> d,
                                      std::span<const double> curvature, PreferenceMode mode, std::size_t k, Rng& rng);

struct RetentionTable {
  std::vector<PreferenceMode> modes;
  std::vector<std::size_t> budgets;
  std::map<std::pair<PreferenceMode, std::size_t>, double> accuracy;
};

inline constexpr std::size_t kCurvatureNeighbors = 16;

/// Fraction of shapes whose assignment on a K-point preference downsample of
/// the canonical view equals the assignment on the full view.
RetentionTable cluster_retention(const Checkpoint& ckpt, const Dataset& dataset, std::span<const std::size_t> budgets,
                                 std::span<const PreferenceMode> modes, std::uint64_t seed);

/// Field on the canonical view of a record, with the view's master indices.
struct RecordDetection {
  ResampledView view;
  DistinctivenessField field;
};
RecordDetection detect_record(const Checkpoint& ckpt, const DatasetRecord& record);

/// Mean d over substructure-masked and unmasked canonical-view points, each
/// averaged over shapes. Shapes without masked points are skipped.
struct SubstructureContrast {
  double masked_mean = 0.0;
  double unmasked_mean = 0.0;
  double ratio = 0.0;  ///< masked / unmasked (infinity when unmasked_mean is 0)
  std::size_t shapes = 0;
};
SubstructureContrast substructure_contrast(const Checkpoint& ckpt, const Dataset& dataset);

/// Max over relabelings of pred (labels < c, c <= 8) of the agreement with truth.
double best_permutation_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth, std::size_t c);

/// Pair-counting adjusted Rand index. 1 when both partitions are trivial and equal.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

}  // namespace distinct
