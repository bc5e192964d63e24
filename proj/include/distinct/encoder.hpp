#pragma once

// Point-set encoder: per-point features F, attention-refined features F^r and
// the unit-norm global feature g, with explicit reverse passes.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "distinct/geometry.hpp"
#include "distinct/tensor.hpp"

namespace distinct {

struct EncoderConfig {
  std::size_t channels = 64;  ///< M
  double r1 = 0.2;
  double r2 = 0.4;
  std::size_t max_neighbors = 32;
  double downsample = 0.25;   ///< fraction of points kept as level-2 centroids
  std::size_t interp_k = 3;
  std::vector<std::size_t> l1_widths = {16, 32};
  std::vector<std::size_t> l2_widths = {48, 64};
  std::vector<std::size_t> up_widths = {64};  ///< hidden widths before the final M-channel layer
  std::size_t attention_reduction = 4;        ///< channel-gate bottleneck = max(1, M / reduction)
  bool attention = true;                      ///< false: F^r is F (ablation)

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
  std::size_t bottleneck() const;
};

enum class FeatureStage { raw, refined };

template <typename T>
struct FeatureMatrix {
  Tensor<T> values;  ///< N x M
  FeatureStage stage = FeatureStage::raw;
};

template <typename T>
struct GlobalFeature {
  Tensor<T> vector;    ///< 1 x M, unit norm
  Tensor<T> pre_norm;  ///< 1 x M row mean of F^r
  double norm = 0.0;
};

/// Saved activations of a shared affine-ReLU stack.
template <typename T>
struct MlpTape {
  std::vector<Tensor<T>> inputs;
  std::vector<Tensor<T>> outputs;
};

template <typename T>
struct AttentionTape {
  Tensor<T> features;        ///< F
  Tensor<T> mean_pool, max_pool;
  GroupMax<T> max_fwd;
  MlpTape<T> mean_mlp, max_mlp;
  Tensor<T> channel_gate;    ///< 1 x M
  Tensor<T> channel_scaled;  ///< F' = F * c
  Tensor<T> spatial_in;      ///< N x 2 [mean, max] over channels of F'
  std::vector<std::uint32_t> spatial_argmax;
  Tensor<T> spatial_gate;    ///< N x 1
};

template <typename T>
struct EncoderTape {
  std::size_t n = 0;
  // level 1
  std::vector<std::size_t> l1_offsets;
  MlpTape<T> l1_mlp;
  GroupMax<T> l1_pool;
  // level 2
  std::vector<std::size_t> centroids;
  std::vector<std::size_t> l2_offsets;
  std::vector<std::size_t> l2_members;  ///< point index per level-2 input row
  MlpTape<T> l2_mlp;
  GroupMax<T> l2_pool;
  // upsampling
  std::vector<std::uint32_t> interp_idx;  ///< N x interp_k centroid slots
  std::vector<double> interp_w;
  std::size_t interp_k = 0;
  std::size_t l1_channels = 0;
  std::size_t l2_channels = 0;
  MlpTape<T> up_mlp;
  // attention and pooling
  bool attention = false;
  AttentionTape<T> att;
  Tensor<T> refined;
  GlobalFeature<T> global;

  /// Hash of every branch decision (ReLU signs, max-pool winners).
  std::uint64_t signature() const;
};

/// Glorot-initialized parameters. The final affine layers of both attention
/// gates start at zero, so every initial gate is exactly 0.5.
template <typename T>
ModelParameters<T> init_encoder(const EncoderConfig& cfg, Rng& rng);

/// Names of affine weight matrices (the weight-decay set).
std::vector<std::string> weight_names(const ModelParameters<float>& params);
std::vector<std::string> weight_names(const ModelParameters<double>& params);

/// Raw per-point features. Throws std::invalid_argument when N < 8.
template <typename T>
FeatureMatrix<T> encode_per_point(const ModelParameters<T>& params, const PointCloud& pc, const EncoderConfig& cfg,
                                  EncoderTape<T>* tape = nullptr);

/// Channel gate from shared-MLP(mean) + shared-MLP(max) over points, then a
/// spatial gate from [mean, max] over channels of the channel-gated features.
template <typename T>
FeatureMatrix<T> attention_refine(const ModelParameters<T>& params, const FeatureMatrix<T>& raw,
                                  AttentionTape<T>* tape = nullptr);

/// Row mean followed by L2 normalization. Throws std::domain_error on a zero mean.
template <typename T>
GlobalFeature<T> global_pool(const FeatureMatrix<T>& refined);

template <typename T>
struct ShapeForward {
  FeatureMatrix<T> features;
  FeatureMatrix<T> refined;
  GlobalFeature<T> global;
};

template <typename T>
ShapeForward<T> forward_shape(const ModelParameters<T>& params, const PointCloud& pc, const EncoderConfig& cfg,
                              EncoderTape<T>* tape = nullptr);

/// Accumulates parameter gradients given dL/dF^r and/or dL/dg (either may be null).
template <typename T>
void backward_shape(const ModelParameters<T>& params, const EncoderTape<T>& tape, const Tensor<T>* d_refined,
                    const Tensor<T>* d_global, GradientSet<T>& grads);

}  // namespace distinct
