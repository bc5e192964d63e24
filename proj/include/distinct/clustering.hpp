#pragma once

// Per-shape feature memory bank, spectral clustering with a k-means back end,
// and cluster prototypes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distinct/linalg.hpp"
#include "distinct/random.hpp"

namespace distinct {

struct SpectralConfig {
  double sigma = 0.5;  ///< affinity bandwidth on the cosine-gap scale
  std::size_t kmeans_restarts = 10;
  std::uint64_t seed = 0;
};

struct MemoryBank {
  Matrix bank;                           ///< N_obj x M, unit rows
  std::vector<std::size_t> assignments;  ///< y_j in [0, C)
  Matrix prototypes;                     ///< C x M, unit rows
  std::size_t clusters = 0;
  std::uint64_t epoch = 0;
  std::vector<std::string> shape_ids;

  /// Throws std::logic_error when a unit-norm or range invariant is broken.
  void check_invariants(double tol = 1e-6) const;
};

/// Rows uniform on the unit sphere, clustered once, prototypes computed.
MemoryBank init_bank(std::size_t n_obj, std::size_t m, std::size_t c, Rng& rng, const SpectralConfig& cfg = {},
                     std::vector<std::string> shape_ids = {});

/// Affinity exp(-(1 - b_i.b_j) / sigma) with zero diagonal, symmetric
/// normalized Laplacian, C smallest eigenvectors (Jacobi), row-normalized
/// spectral embedding, k-means.
std::vector<std::size_t> spectral_cluster(const Matrix& bank, std::size_t c, const SpectralConfig& cfg = {});

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centroids;
  double wcss = 0.0;
};

/// Best of `restarts` k-means++ runs by within-cluster sum of squares. Lloyd
/// iterations stop at max centroid movement <= tol or max_iter.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                    std::size_t max_iter = 100, double tol = 1e-6);

/// normalize(mean of member rows); an empty cluster gets a random unit vector.
Matrix compute_prototypes(const Matrix& bank, std::span<const std::size_t> assignments, std::size_t c, Rng& rng);

/// Replaces the stored feature of one shape.
void bank_update(MemoryBank& bank, std::size_t row, std::span<const double> g);
void bank_update(MemoryBank& bank, std::string_view shape_id, std::span<const double> g);

/// Relabels `next` to maximize overlap with `prev` (greedy on the contingency
/// table). Returns the relabeled assignments.
std::vector<std::size_t> align_labels(std::span<const std::size_t> prev, std::span<const std::size_t> next,
                                      std::size_t c);

/// Uniform random unit vector.
std::vector<double> random_unit_vector(std::size_t m, Rng& rng);

}  // namespace distinct
