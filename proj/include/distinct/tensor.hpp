#pragma once

// Minimal dense tensors and the forward/backward primitives used by the
// encoder and objective. Every primitive is a forward function plus an explicit
// backward function over the values saved by the forward pass; the encoder
// records the sequence itself, so there is no general expression graph.
//
// Storage type T is float (default) or double (test mode). Reductions
// accumulate in double.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "distinct/random.hpp"

namespace distinct {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0));
  static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) { return Tensor({rows, cols}, fill); }
  static Tensor vector(std::size_t n, T fill = T(0)) { return Tensor({n}, fill); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  /// First dimension (1 for rank 0).
  std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  /// Product of the remaining dimensions.
  std::size_t cols() const;

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(T v);
  bool all_finite() const;
  std::string shape_string() const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

template <typename T>
using TensorMap = std::map<std::string, Tensor<T>>;

/// Same keys and shapes as the parameters they differentiate.
template <typename T>
using GradientSet = TensorMap<T>;

template <typename T>
struct ModelParameters {
  TensorMap<T> values;
  TensorMap<T> adam_m;
  TensorMap<T> adam_v;
  std::uint64_t step = 0;

  /// Registers a parameter and zero moments. Throws on duplicate names.
  void add(const std::string& name, Tensor<T> value);
  const Tensor<T>& at(const std::string& name) const;
  Tensor<T>& at(const std::string& name);
  bool contains(const std::string& name) const { return values.contains(name); }

  GradientSet<T> zero_gradients() const;

  template <typename U>
  ModelParameters<U> cast() const {
    ModelParameters<U> out;
    for (const auto& [k, v] : values) out.values.emplace(k, v.template cast<U>());
    for (const auto& [k, v] : adam_m) out.adam_m.emplace(k, v.template cast<U>());
    for (const auto& [k, v] : adam_v) out.adam_v.emplace(k, v.template cast<U>());
    out.step = step;
    return out;
  }

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

/// Glorot-uniform weight (fan_in x fan_out) named `<prefix>.w` and zero bias `<prefix>.b`.
template <typename T>
void init_affine(ModelParameters<T>& params, const std::string& prefix, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Adds src into dst; keys of src must exist in dst with equal shapes.
template <typename T>
void accumulate(GradientSet<T>& dst, const GradientSet<T>& src);

// ---------------------------------------------------------------------------
// Primitives. Backward functions accumulate (+=) into gradient outputs.

/// Y = X W + b with X: R x I, W: I x O, b: O.
template <typename T>
Tensor<T> affine_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
/// dx may be null when the input gradient is not needed.
template <typename T>
void affine_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>& dw,
                     Tensor<T>& db);

template <typename T>
void relu_inplace(Tensor<T>& x);
/// Uses the forward output y: gradient passes where y > 0.
template <typename T>
void relu_backward(const Tensor<T>& y, Tensor<T>& dy);

template <typename T>
void sigmoid_inplace(Tensor<T>& x);
template <typename T>
void sigmoid_backward(const Tensor<T>& y, Tensor<T>& dy);

/// Max over row groups [offsets[g], offsets[g+1]); argmax is the first maximal row.
template <typename T>
struct GroupMax {
  Tensor<T> out;
  std::vector<std::uint32_t> argmax;  ///< groups x cols, row index into the input
};
template <typename T>
GroupMax<T> group_max_forward(const Tensor<T>& x, std::span<const std::size_t> offsets);
template <typename T>
void group_max_backward(const GroupMax<T>& fwd, const Tensor<T>& dy, Tensor<T>& dx);

/// Column means (1 x C), accumulated in double.
template <typename T>
Tensor<T> row_mean_forward(const Tensor<T>& x);
template <typename T>
void row_mean_backward(const Tensor<T>& dy, Tensor<T>& dx);

/// u = v / |v|. Throws std::domain_error on a zero vector.
template <typename T>
Tensor<T> l2_normalize_forward(const Tensor<T>& v, double* norm_out = nullptr);
template <typename T>
void l2_normalize_backward(const Tensor<T>& u, double norm, const Tensor<T>& du, Tensor<T>& dv);

/// [A | B] column concatenation of equal-row matrices.
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b);
/// Splits a concatenated gradient back into its two halves (accumulating).
template <typename T>
void concat_cols_backward(const Tensor<T>& dy, Tensor<T>& da, Tensor<T>& db);

/// softmax(z / tau), computed in double.
std::vector<double> softmax_temperature(std::span<const double> logits, double tau);
/// dz from dp for p = softmax(z / tau).
std::vector<double> softmax_temperature_backward(std::span<const double> p, std::span<const double> dp, double tau);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bias-corrected Adam; increments params.step once. Parameters without a
/// gradient entry are left untouched.
template <typename T>
void adam_step(ModelParameters<T>& params, const GradientSet<T>& grads, const AdamConfig& cfg);

/// Loss value plus a signature of every non-smooth branch taken (ReLU signs,
/// max-pool winners, hinge state). Central differences whose perturbed
/// evaluations change the signature straddle a kink and are resampled.
struct LossProbe {
  double loss = 0.0;
  std::uint64_t signature = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t stencil = 2;       ///< 2: (f(+h) - f(-h)) / 2h; 4: fourth-order five-point rule
  std::size_t samples = 200;     ///< coordinates to check (all when larger than the count)
  std::size_t max_attempts = 0;  ///< 0 -> 20 x samples
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::vector<std::string> non_finite;  ///< "name[index]" where a perturbed loss was not finite
};

/// max |analytic - numeric| / max(1e-8, |analytic| + |numeric|) over sampled coordinates.
template <typename T>
GradCheckResult gradient_check(const std::function<LossProbe(const ModelParameters<T>&)>& loss_fn,
                               const GradientSet<T>& analytic, const ModelParameters<T>& params,
                               const GradCheckOptions& opts = {});

/// Folds a value into a running signature.
inline std::uint64_t signature_mix(std::uint64_t h, std::uint64_t v) {
  return (h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2))) * 0x100000001b3ULL;
}

}  // namespace distinct
