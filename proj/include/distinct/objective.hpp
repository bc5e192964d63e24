#pragma once

// Loss terms over unit-norm global features: nonparametric cluster softmax,
// adapted contrastive hinge, adapted center loss, the optional supervised
// head, and their weighted combination.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "distinct/linalg.hpp"
#include "distinct/synth.hpp"
#include "distinct/tensor.hpp"

namespace distinct {

using Vector = std::vector<double>;

inline constexpr double kDefaultTemperature = 0.07;
inline constexpr double kDefaultMargin = 2.0;
inline constexpr double kDefaultAlpha = 3.0;
inline constexpr double kDefaultBeta = 1e-5;

/// softmax_k(normalize(prototype_k) . g / tau). Throws on tau <= 0.
Vector cluster_probability(std::span<const double> g, const Matrix& prototypes, double tau);

/// Loss value plus its gradient with respect to each input feature.
struct BatchLoss {
  double value = 0.0;
  std::vector<Vector> grad;
};

/// Mean over the batch of -log P(y_j | g_j). Prototypes are constants.
BatchLoss cluster_loss(const std::vector<Vector>& g, std::span<const std::size_t> assignments,
                       const Matrix& prototypes, double tau);

/// Mean over the batch of 1/2 |g_j - prototype_{y_j}|^2.
BatchLoss center_loss(const std::vector<Vector>& g, std::span<const std::size_t> assignments,
                      const Matrix& prototypes);

struct ContrastiveLoss {
  double value = 0.0;
  Vector d_anchor, d_positive, d_negative;
  bool hinge_active = false;
};

/// D(g, g+) + max(0, margin - D(g, g-)) with Euclidean D. Subgradient 0 at
/// D = 0 and at the hinge corner.
ContrastiveLoss contrastive_loss(std::span<const double> g, std::span<const double> g_pos,
                                 std::span<const double> g_neg, double margin);

struct TripletBatch {
  PointCloud anchor_cloud;
  PointCloud positive_cloud;
  PointCloud negative_cloud;
  std::size_t anchor_index = 0;
  std::size_t negative_index = 0;
  std::string anchor_id;
  std::string negative_id;
  bool fallback_negative = false;  ///< every shape shared the anchor's cluster
};

/// Anchor and positive are two resamples of the anchor's record; the negative
/// is a uniform pick among shapes assigned to other clusters.
TripletBatch build_triplet(const Dataset& dataset, std::size_t anchor, std::span<const std::size_t> assignments,
                           Rng& rng, const ResampleOptions& resample = {});

template <typename T>
void init_supervised_head(ModelParameters<T>& params, std::size_t channels, std::size_t classes, Rng& rng);

template <typename T>
struct HeadLoss {
  double value = 0.0;
  std::vector<Vector> d_global;
  GradientSet<T> grads;  ///< head.w, head.b
};

/// Affine head on g followed by mean softmax cross-entropy. Throws when a label >= classes.
template <typename T>
HeadLoss<T> supervised_head_loss(const ModelParameters<T>& params, const std::vector<Vector>& g,
                                 std::span<const std::size_t> labels, std::size_t classes);

struct LossBreakdown {
  double cluster_term = 0.0;
  double contrastive_term = 0.0;
  double weight_decay_term = 0.0;
  double total = 0.0;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  double tau = kDefaultTemperature;
  double margin = kDefaultMargin;
};

/// total = cluster + alpha * contrastive + beta * decay. Throws on negative weights.
LossBreakdown joint_loss(double cluster, double contrastive, double decay, double alpha, double beta);

/// Sum of squared entries over the named tensors, and its gradient 2 * scale * w.
template <typename T>
double weight_decay(const ModelParameters<T>& params, const std::vector<std::string>& names);
template <typename T>
void weight_decay_backward(const ModelParameters<T>& params, const std::vector<std::string>& names, double scale,
                           GradientSet<T>& grads);

}  // namespace distinct
