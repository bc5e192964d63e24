#include "distinct/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "distinct/simd.hpp"

namespace distinct {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected a matrix, got " + t.shape_string());
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what, const char* an, const char* bn) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": " + an + " " + a.shape_string() + " vs " + bn + " " + b.shape_string());
  }
}

// Double copy of a row, reused as the AXPY source for double accumulation.
template <typename T>
void to_double(const T* src, std::size_t n, std::vector<double>& dst) {
  dst.resize(n);
  for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<double>(src[i]);
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, T fill) : shape_(std::move(shape)), data_(product(shape_), fill) {}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (shape_.size() <= 1) return 1;
  std::size_t c = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return c;
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
std::string Tensor<T>::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

template <typename T>
void ModelParameters<T>::add(const std::string& name, Tensor<T> value) {
  if (values.contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  adam_m.emplace(name, Tensor<T>(value.shape()));
  adam_v.emplace(name, Tensor<T>(value.shape()));
  values.emplace(name, std::move(value));
}

template <typename T>
const Tensor<T>& ModelParameters<T>::at(const std::string& name) const {
  const auto it = values.find(name);
  if (it == values.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ModelParameters<T>::at(const std::string& name) {
  const auto it = values.find(name);
  if (it == values.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
GradientSet<T> ModelParameters<T>::zero_gradients() const {
  GradientSet<T> g;
  for (const auto& [k, v] : values) g.emplace(k, Tensor<T>(v.shape()));
  return g;
}

template <typename T>
void init_affine(ModelParameters<T>& params, const std::string& prefix, std::size_t fan_in, std::size_t fan_out,
                 Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> w = Tensor<T>::matrix(fan_in, fan_out);
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  params.add(prefix + ".w", std::move(w));
  params.add(prefix + ".b", Tensor<T>::vector(fan_out));
}

template <typename T>
void accumulate(GradientSet<T>& dst, const GradientSet<T>& src) {
  for (const auto& [k, v] : src) {
    auto it = dst.find(k);
    if (it == dst.end()) throw std::invalid_argument("accumulate: unknown gradient '" + k + "'");
    require_same_shape(it->second, v, "accumulate", k.c_str(), "source");
    T* d = it->second.data();
    for (std::size_t i = 0; i < v.size(); ++i) d[i] += v[i];
  }
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> affine_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_matrix(x, "affine x");
  require_matrix(w, "affine w");
  if (x.cols() != w.rows() || b.size() != w.cols()) {
    throw ShapeError("affine: x " + x.shape_string() + ", w " + w.shape_string() + ", b " + b.shape_string());
  }
  const std::size_t rows = x.rows(), in = w.rows(), out = w.cols();
  std::vector<double> wd, bd, acc(out);
  to_double(w.data(), w.size(), wd);
  to_double(b.data(), b.size(), bd);
  Tensor<T> y = Tensor<T>::matrix(rows, out);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(bd.begin(), bd.end(), acc.begin());
    const T* xr = x.data() + r * in;
    for (std::size_t i = 0; i < in; ++i) {
      if (xr[i] != T(0)) simd::axpy(static_cast<double>(xr[i]), wd.data() + i * out, acc.data(), out);
    }
    T* yr = y.data() + r * out;
    for (std::size_t o = 0; o < out; ++o) yr[o] = static_cast<T>(acc[o]);
  }
  return y;
}

template <typename T>
void affine_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>& dw,
                     Tensor<T>& db) {
  const std::size_t rows = x.rows(), in = w.rows(), out = w.cols();
  if (dy.rows() != rows || dy.cols() != out) {
    throw ShapeError("affine_backward: dy " + dy.shape_string() + " for x " + x.shape_string() + ", w " +
                     w.shape_string());
  }
  require_same_shape(dw, w, "affine_backward", "dw", "w");
  if (db.size() != out) throw ShapeError("affine_backward: db " + db.shape_string());
  if (dx != nullptr) require_same_shape(*dx, x, "affine_backward", "dx", "x");

  std::vector<double> dwd(in * out, 0.0), dbd(out, 0.0), dyr;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dyp = dy.data() + r * out;
    to_double(dyp, out, dyr);
    const T* xr = x.data() + r * in;
    for (std::size_t i = 0; i < in; ++i) {
      if (xr[i] != T(0)) simd::axpy(static_cast<double>(xr[i]), dyr.data(), dwd.data() + i * out, out);
    }
    simd::axpy(1.0, dyr.data(), dbd.data(), out);
    if (dx != nullptr) {
      T* dxr = dx->data() + r * in;
      for (std::size_t i = 0; i < in; ++i) {
        dxr[i] += static_cast<T>(simd::dot(dyp, w.data() + i * out, out));
      }
    }
  }
  for (std::size_t i = 0; i < in * out; ++i) dw[i] += static_cast<T>(dwd[i]);
  for (std::size_t o = 0; o < out; ++o) db[o] += static_cast<T>(dbd[o]);
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.values()) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& y, Tensor<T>& dy) {
  require_same_shape(y, dy, "relu_backward", "y", "dy");
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!(y[i] > T(0))) dy[i] = T(0);
}

template <typename T>
void sigmoid_inplace(Tensor<T>& x) {
  for (auto& v : x.values()) v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
}

template <typename T>
void sigmoid_backward(const Tensor<T>& y, Tensor<T>& dy) {
  require_same_shape(y, dy, "sigmoid_backward", "y", "dy");
  for (std::size_t i = 0; i < y.size(); ++i) dy[i] = static_cast<T>(dy[i] * (double(y[i]) * (1.0 - double(y[i]))));
}

template <typename T>
GroupMax<T> group_max_forward(const Tensor<T>& x, std::span<const std::size_t> offsets) {
  require_matrix(x, "group_max x");
  if (offsets.size() < 2 || offsets.back() != x.rows()) {
    throw ShapeError("group_max: offsets do not cover x " + x.shape_string());
  }
  const std::size_t groups = offsets.size() - 1, cols = x.cols();
  GroupMax<T> g{Tensor<T>::matrix(groups, cols), std::vector<std::uint32_t>(groups * cols)};
  for (std::size_t k = 0; k < groups; ++k) {
    const std::size_t b = offsets[k], e = offsets[k + 1];
    if (e <= b) throw ShapeError("group_max: empty group " + std::to_string(k));
    T* out = g.out.data() + k * cols;
    std::uint32_t* arg = g.argmax.data() + k * cols;
    const T* first = x.data() + b * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = first[c];
      arg[c] = static_cast<std::uint32_t>(b);
    }
    for (std::size_t r = b + 1; r < e; ++r) {
      const T* xr = x.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        if (xr[c] > out[c]) {
          out[c] = xr[c];
          arg[c] = static_cast<std::uint32_t>(r);
        }
      }
    }
  }
  return g;
}

template <typename T>
void group_max_backward(const GroupMax<T>& fwd, const Tensor<T>& dy, Tensor<T>& dx) {
  require_same_shape(fwd.out, dy, "group_max_backward", "out", "dy");
  const std::size_t cols = dy.cols();
  if (dx.cols() != cols) throw ShapeError("group_max_backward: dx " + dx.shape_string());
  for (std::size_t k = 0; k < dy.rows(); ++k)
    for (std::size_t c = 0; c < cols; ++c) dx(fwd.argmax[k * cols + c], c) += dy(k, c);
}

template <typename T>
Tensor<T> row_mean_forward(const Tensor<T>& x) {
  require_matrix(x, "row_mean x");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (rows == 0) throw ShapeError("row_mean: no rows");
  std::vector<double> acc(cols, 0.0), xr;
  for (std::size_t r = 0; r < rows; ++r) {
    to_double(x.data() + r * cols, cols, xr);
    simd::axpy(1.0, xr.data(), acc.data(), cols);
  }
  Tensor<T> m = Tensor<T>::matrix(1, cols);
  for (std::size_t c = 0; c < cols; ++c) m[c] = static_cast<T>(acc[c] / static_cast<double>(rows));
  return m;
}

template <typename T>
void row_mean_backward(const Tensor<T>& dy, Tensor<T>& dx) {
  const std::size_t rows = dx.rows(), cols = dx.cols();
  if (dy.size() != cols) throw ShapeError("row_mean_backward: dy " + dy.shape_string() + " for dx " + dx.shape_string());
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dx(r, c) += static_cast<T>(dy[c] * inv);
}

template <typename T>
Tensor<T> l2_normalize_forward(const Tensor<T>& v, double* norm_out) {
  double ss = 0.0;
  for (T x : v.values()) ss += double(x) * double(x);
  const double n = std::sqrt(ss);
  if (!(n > 0.0)) throw std::domain_error("l2_normalize: zero vector");
  Tensor<T> u(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) u[i] = static_cast<T>(double(v[i]) / n);
  if (norm_out != nullptr) *norm_out = n;
  return u;
}

template <typename T>
void l2_normalize_backward(const Tensor<T>& u, double norm, const Tensor<T>& du, Tensor<T>& dv) {
  require_same_shape(u, du, "l2_normalize_backward", "u", "du");
  require_same_shape(u, dv, "l2_normalize_backward", "u", "dv");
  double proj = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) proj += double(u[i]) * double(du[i]);
  for (std::size_t i = 0; i < u.size(); ++i) dv[i] += static_cast<T>((double(du[i]) - double(u[i]) * proj) / norm);
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) throw ShapeError("concat: a " + a.shape_string() + " vs b " + b.shape_string());
  const std::size_t ca = a.cols(), cb = b.cols();
  Tensor<T> y = Tensor<T>::matrix(a.rows(), ca + cb);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.data() + r * ca, ca, y.data() + r * (ca + cb));
    std::copy_n(b.data() + r * cb, cb, y.data() + r * (ca + cb) + ca);
  }
  return y;
}

template <typename T>
void concat_cols_backward(const Tensor<T>& dy, Tensor<T>& da, Tensor<T>& db) {
  const std::size_t ca = da.cols(), cb = db.cols();
  if (dy.cols() != ca + cb || dy.rows() != da.rows() || da.rows() != db.rows()) {
    throw ShapeError("concat_backward: dy " + dy.shape_string() + " vs " + da.shape_string() + " + " +
                     db.shape_string());
  }
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    for (std::size_t c = 0; c < ca; ++c) da(r, c) += dy(r, c);
    for (std::size_t c = 0; c < cb; ++c) db(r, c) += dy(r, ca + c);
  }
}

std::vector<double> softmax_temperature(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
  if (logits.empty()) throw ShapeError("softmax: no logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp((logits[i] - mx) / tau));
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> softmax_temperature_backward(std::span<const double> p, std::span<const double> dp, double tau) {
  if (p.size() != dp.size()) throw ShapeError("softmax_backward: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * dp[i];
  std::vector<double> dz(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dz[i] = p[i] * (dp[i] - s) / tau;
  return dz;
}

// ---------------------------------------------------------------------------

template <typename T>
void adam_step(ModelParameters<T>& params, const GradientSet<T>& grads, const AdamConfig& cfg) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) throw NonFiniteGradient("non-finite gradient for parameter '" + name + "'");
    require_same_shape(params.at(name), g, "adam_step", name.c_str(), "gradient");
  }
  params.step += 1;
  const double t = static_cast<double>(params.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor<T>& p = params.values.at(name);
    Tensor<T>& m = params.adam_m.at(name);
    Tensor<T>& v = params.adam_v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / c1, vhat = vi / c2;
      p[i] = static_cast<T>(double(p[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

template <typename T>
GradCheckResult gradient_check(const std::function<LossProbe(const ModelParameters<T>&)>& loss_fn,
                               const GradientSet<T>& analytic, const ModelParameters<T>& params,
                               const GradCheckOptions& opts) {
  struct Coord {
    std::string name;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (const auto& [name, g] : analytic) {
    for (std::size_t i = 0; i < g.size(); ++i) coords.push_back({name, i});
  }
  Rng rng(opts.seed);
  // Fisher-Yates so the checked coordinates are a uniform sample without replacement.
  for (std::size_t i = coords.size(); i > 1; --i) std::swap(coords[i - 1], coords[rng.below(i)]);

  const LossProbe base = loss_fn(params);
  ModelParameters<T> work = params;
  GradCheckResult res;
  const std::size_t attempts = opts.max_attempts ? opts.max_attempts : 20 * opts.samples;
  for (std::size_t a = 0; a < coords.size() && a < attempts && res.checked < opts.samples; ++a) {
    const Coord& c = coords[a];
    T& slot = work.at(c.name)[c.index];
    const T orig = slot;
    const std::size_t npts = opts.stencil == 4 ? 4 : 2;
    const double steps[4] = {1.0, -1.0, 2.0, -2.0};
    double at[4] = {}, f[4] = {};
    bool kink = false, bad = false;
    for (std::size_t k = 0; k < npts; ++k) {
      slot = static_cast<T>(double(orig) + steps[k] * opts.eps);
      at[k] = slot;
      const LossProbe probe = loss_fn(work);
      f[k] = probe.loss;
      bad |= !std::isfinite(probe.loss);
      kink |= probe.signature != base.signature;
    }
    slot = orig;
    if (bad) {
      res.non_finite.push_back(c.name + "[" + std::to_string(c.index) + "]");
      continue;
    }
    if (kink) {
      ++res.skipped_kinks;
      continue;
    }
    // Differences first so a flat loss gives exactly zero; step widths are the
    // actually representable perturbations.
    double numeric = (f[0] - f[1]) / (at[0] - at[1]);
    if (npts == 4) numeric = (4.0 * numeric - (f[2] - f[3]) / (at[2] - at[3])) / 3.0;
    const double an = analytic.at(c.name)[c.index];
    const double err = std::abs(an - numeric) / std::max(1e-8, std::abs(an) + std::abs(numeric));
    ++res.checked;
    if (res.checked == 1 || err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_name = c.name;
      res.worst_index = c.index;
      res.worst_analytic = an;
      res.worst_numeric = numeric;
    }
  }
  return res;
}

#define DISTINCT_INSTANTIATE(T)                                                                                   \
  template class Tensor<T>;                                                                                       \
  template struct ModelParameters<T>;                                                                             \
  template void init_affine<T>(ModelParameters<T>&, const std::string&, std::size_t, std::size_t, Rng&);          \
  template void accumulate<T>(GradientSet<T>&, const GradientSet<T>&);                                            \
  template Tensor<T> affine_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template void affine_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*, Tensor<T>&,  \
                                   Tensor<T>&);                                                                   \
  template void relu_inplace<T>(Tensor<T>&);                                                                      \
  template void relu_backward<T>(const Tensor<T>&, Tensor<T>&);                                                   \
  template void sigmoid_inplace<T>(Tensor<T>&);                                                                   \
  template void sigmoid_backward<T>(const Tensor<T>&, Tensor<T>&);                                                \
  template GroupMax<T> group_max_forward<T>(const Tensor<T>&, std::span<const std::size_t>);                      \
  template void group_max_backward<T>(const GroupMax<T>&, const Tensor<T>&, Tensor<T>&);                          \
  template Tensor<T> row_mean_forward<T>(const Tensor<T>&);                                                       \
  template void row_mean_backward<T>(const Tensor<T>&, Tensor<T>&);                                               \
  template Tensor<T> l2_normalize_forward<T>(const Tensor<T>&, double*);                                          \
  template void l2_normalize_backward<T>(const Tensor<T>&, double, const Tensor<T>&, Tensor<T>&);                 \
  template Tensor<T> concat_cols<T>(const Tensor<T>&, const Tensor<T>&);                                          \
  template void concat_cols_backward<T>(const Tensor<T>&, Tensor<T>&, Tensor<T>&);                                \
  template void adam_step<T>(ModelParameters<T>&, const GradientSet<T>&, const AdamConfig&);                      \
  template GradCheckResult gradient_check<T>(const std::function<LossProbe(const ModelParameters<T>&)>&,          \
                                             const GradientSet<T>&, const ModelParameters<T>&,                    \
                                             const GradCheckOptions&);

DISTINCT_INSTANTIATE(float)
DISTINCT_INSTANTIATE(double)

#undef DISTINCT_INSTANTIATE

}  // namespace distinct
