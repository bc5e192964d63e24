#include "distinct/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace distinct {
namespace {

std::string layer_name(const std::string& prefix, std::size_t k) { return prefix + ".fc" + std::to_string(k); }

// Stack of affine layers; ReLU after every layer, or after all but the last
// when relu_last is false.
template <typename T>
Tensor<T> mlp_forward(const ModelParameters<T>& params, const std::string& prefix, std::size_t layers, Tensor<T> x,
                      bool relu_last, MlpTape<T>* tape) {
  for (std::size_t k = 0; k < layers; ++k) {
    const std::string name = layer_name(prefix, k);
    Tensor<T> y = affine_forward(x, params.at(name + ".w"), params.at(name + ".b"));
    if (relu_last || k + 1 < layers) relu_inplace(y);
    if (tape != nullptr) {
      tape->inputs.push_back(std::move(x));
      tape->outputs.push_back(y);
    }
    x = std::move(y);
  }
  return x;
}

template <typename T>
Tensor<T> mlp_backward(const ModelParameters<T>& params, const std::string& prefix, const MlpTape<T>& tape,
                       Tensor<T> dy, bool relu_last, bool need_dx, GradientSet<T>& grads) {
  const std::size_t layers = tape.inputs.size();
  for (std::size_t k = layers; k-- > 0;) {
    const std::string name = layer_name(prefix, k);
    if (relu_last || k + 1 < layers) relu_backward(tape.outputs[k], dy);
    const bool want_dx = need_dx || k > 0;
    Tensor<T> dx = want_dx ? Tensor<T>(tape.inputs[k].shape()) : Tensor<T>();
    affine_backward(tape.inputs[k], params.at(name + ".w"), dy, want_dx ? &dx : nullptr, grads.at(name + ".w"),
                    grads.at(name + ".b"));
    dy = std::move(dx);
  }
  return dy;
}

template <typename T>
std::uint64_t hash_relu(std::uint64_t h, const MlpTape<T>& tape, bool relu_last) {
  for (std::size_t k = 0; k < tape.outputs.size(); ++k) {
    if (!relu_last && k + 1 == tape.outputs.size()) continue;
    std::uint64_t word = 0;
    std::size_t bits = 0;
    for (T v : tape.outputs[k].values()) {
      word = (word << 1) | (v > T(0) ? 1u : 0u);
      if (++bits == 64) {
        h = signature_mix(h, word);
        word = 0;
        bits = 0;
      }
    }
    h = signature_mix(h, word ^ (bits << 58));
  }
  return h;
}

std::uint64_t hash_indices(std::uint64_t h, const std::vector<std::uint32_t>& v) {
  for (std::uint32_t x : v) h = signature_mix(h, x);
  return h;
}

// Start FPS at the point farthest from the centroid so the centroid set does
// not depend on input order.
std::size_t fps_start(const PointCloud& pc) {
  const Vec3 c = centroid(pc);
  std::size_t best = 0;
  double far = -1.0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double d = norm(pc.points[i] - c);
    if (d > far) {
      far = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

void EncoderConfig::validate() const {
  if (channels == 0) throw std::invalid_argument("encoder: channels must be positive");
  if (!(r1 > 0.0 && r1 < r2 && r2 <= 2.0)) throw std::invalid_argument("encoder: need 0 < r1 < r2 <= 2");
  if (!(downsample > 0.0 && downsample <= 1.0)) throw std::invalid_argument("encoder: downsample must be in (0, 1]");
  if (max_neighbors == 0 || interp_k == 0) throw std::invalid_argument("encoder: neighbor counts must be positive");
  if (l1_widths.empty() || l2_widths.empty()) throw std::invalid_argument("encoder: level widths must be nonempty");
  if (attention_reduction == 0) throw std::invalid_argument("encoder: attention_reduction must be positive");
}

std::size_t EncoderConfig::bottleneck() const { return std::max<std::size_t>(1, channels / attention_reduction); }

template <typename T>
ModelParameters<T> init_encoder(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParameters<T> p;
  std::size_t in = 3;
  for (std::size_t k = 0; k < cfg.l1_widths.size(); ++k) {
    init_affine(p, layer_name("l1", k), in, cfg.l1_widths[k], rng);
    in = cfg.l1_widths[k];
  }
  const std::size_t c1 = in;
  in = 3 + c1;
  for (std::size_t k = 0; k < cfg.l2_widths.size(); ++k) {
    init_affine(p, layer_name("l2", k), in, cfg.l2_widths[k], rng);
    in = cfg.l2_widths[k];
  }
  in = in + c1;
  std::vector<std::size_t> up = cfg.up_widths;
  up.push_back(cfg.channels);
  for (std::size_t k = 0; k < up.size(); ++k) {
    init_affine(p, layer_name("up", k), in, up[k], rng);
    in = up[k];
  }
  if (cfg.attention) {
    init_affine(p, "att.fc0", cfg.channels, cfg.bottleneck(), rng);
    p.add("att.fc1.w", Tensor<T>::matrix(cfg.bottleneck(), cfg.channels));
    p.add("att.fc1.b", Tensor<T>::vector(cfg.channels));
    p.add("att.sp.w", Tensor<T>::matrix(2, 1));
    p.add("att.sp.b", Tensor<T>::vector(1));
  }
  return p;
}

template <typename T>
static std::vector<std::string> weight_names_impl(const ModelParameters<T>& params) {
  std::vector<std::string> out;
  for (const auto& [k, v] : params.values)
    if (k.size() > 2 && k.ends_with(".w")) out.push_back(k);
  return out;
}
std::vector<std::string> weight_names(const ModelParameters<float>& params) { return weight_names_impl(params); }
std::vector<std::string> weight_names(const ModelParameters<double>& params) { return weight_names_impl(params); }

template <typename T>
std::uint64_t EncoderTape<T>::signature() const {
  std::uint64_t h = 0x51ed270b27c4d3a1ULL;
  h = hash_relu(h, l1_mlp, true);
  h = hash_indices(h, l1_pool.argmax);
  h = hash_relu(h, l2_mlp, true);
  h = hash_indices(h, l2_pool.argmax);
  h = hash_relu(h, up_mlp, false);
  if (attention) {
    h = hash_indices(h, att.max_fwd.argmax);
    h = hash_relu(h, att.mean_mlp, false);
    h = hash_relu(h, att.max_mlp, false);
    h = hash_indices(h, att.spatial_argmax);
  }
  return h;
}

template <typename T>
FeatureMatrix<T> encode_per_point(const ModelParameters<T>& params, const PointCloud& pc, const EncoderConfig& cfg,
                                  EncoderTape<T>* tape) {
  const std::size_t n = pc.size();
  if (n < 8) throw std::invalid_argument("encode_per_point: need at least 8 points, got " + std::to_string(n));
  EncoderTape<T> local;
  EncoderTape<T>& tp = tape != nullptr ? *tape : local;
  tp = EncoderTape<T>{};
  tp.n = n;

  // Level 1: ball neighborhoods around every point, relative offsets.
  const GridIndex grid1(pc, cfg.r1);
  std::vector<std::size_t> members;
  tp.l1_offsets.assign(1, 0);
  std::vector<std::vector<std::size_t>> nb1(n);
  for (std::size_t i = 0; i < n; ++i) {
    nb1[i] = grid1.radius_query(pc.points[i], cfg.r1, cfg.max_neighbors);
    tp.l1_offsets.push_back(tp.l1_offsets.back() + nb1[i].size());
  }
  Tensor<T> x1 = Tensor<T>::matrix(tp.l1_offsets.back(), 3);
  for (std::size_t i = 0, row = 0; i < n; ++i) {
    for (std::size_t j : nb1[i]) {
      const Vec3 d = pc.points[j] - pc.points[i];
      x1(row, 0) = static_cast<T>(d.x);
      x1(row, 1) = static_cast<T>(d.y);
      x1(row, 2) = static_cast<T>(d.z);
      ++row;
    }
  }
  Tensor<T> h1 = mlp_forward(params, "l1", cfg.l1_widths.size(), std::move(x1), true, tape ? &tp.l1_mlp : nullptr);
  tp.l1_pool = group_max_forward(h1, tp.l1_offsets);
  const Tensor<T>& f1 = tp.l1_pool.out;
  const std::size_t c1 = f1.cols();
  tp.l1_channels = c1;

  // Level 2: FPS centroids, balls over level-1 features plus offsets.
  const std::size_t n2 = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * cfg.downsample)), 1, n);
  tp.centroids = farthest_point_sample(pc, n2, fps_start(pc));
  const GridIndex grid2(pc, cfg.r2);
  tp.l2_offsets.assign(1, 0);
  tp.l2_members.clear();
  for (std::size_t c : tp.centroids) {
    for (std::size_t j : grid2.radius_query(pc.points[c], cfg.r2, cfg.max_neighbors)) tp.l2_members.push_back(j);
    tp.l2_offsets.push_back(tp.l2_members.size());
  }
  Tensor<T> x2 = Tensor<T>::matrix(tp.l2_members.size(), 3 + c1);
  for (std::size_t g = 0; g < n2; ++g) {
    const Vec3& cp = pc.points[tp.centroids[g]];
    for (std::size_t row = tp.l2_offsets[g]; row < tp.l2_offsets[g + 1]; ++row) {
      const std::size_t j = tp.l2_members[row];
      const Vec3 d = pc.points[j] - cp;
      x2(row, 0) = static_cast<T>(d.x);
      x2(row, 1) = static_cast<T>(d.y);
      x2(row, 2) = static_cast<T>(d.z);
      std::copy_n(f1.data() + j * c1, c1, x2.data() + row * (3 + c1) + 3);
    }
  }
  Tensor<T> h2 = mlp_forward(params, "l2", cfg.l2_widths.size(), std::move(x2), true, tape ? &tp.l2_mlp : nullptr);
  tp.l2_pool = group_max_forward(h2, tp.l2_offsets);
  const Tensor<T>& f2 = tp.l2_pool.out;
  const std::size_t c2 = f2.cols();
  tp.l2_channels = c2;

  // Upsampling: inverse-distance interpolation from the nearest centroids.
  PointCloud centers;
  centers.points.reserve(n2);
  for (std::size_t c : tp.centroids) centers.points.push_back(pc.points[c]);
  const std::size_t kk = std::min(cfg.interp_k, n2);
  tp.interp_k = kk;
  tp.interp_idx.assign(n * kk, 0);
  tp.interp_w.assign(n * kk, 0.0);
  Tensor<T> interp = Tensor<T>::matrix(n, c2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto near = k_nearest(centers, pc.points[i], kk);
    double wsum = 0.0;
    for (std::size_t s = 0; s < kk; ++s) {
      const double w = 1.0 / (distance(pc.points[i], centers.points[near[s]]) + 1e-8);
      tp.interp_idx[i * kk + s] = static_cast<std::uint32_t>(near[s]);
      tp.interp_w[i * kk + s] = w;
      wsum += w;
    }
    for (std::size_t s = 0; s < kk; ++s) {
      const double w = (tp.interp_w[i * kk + s] /= wsum);
      const T* src = f2.data() + near[s] * c2;
      T* dst = interp.data() + i * c2;
      for (std::size_t c = 0; c < c2; ++c) dst[c] = static_cast<T>(double(dst[c]) + w * double(src[c]));
    }
  }
  Tensor<T> up_in = concat_cols(interp, f1);
  Tensor<T> f = mlp_forward(params, "up", cfg.up_widths.size() + 1, std::move(up_in), false, tape ? &tp.up_mlp : nullptr);
  return {std::move(f), FeatureStage::raw};
}

template <typename T>
FeatureMatrix<T> attention_refine(const ModelParameters<T>& params, const FeatureMatrix<T>& raw,
                                  AttentionTape<T>* tape) {
  if (raw.stage != FeatureStage::raw) throw std::invalid_argument("attention_refine: expects raw features");
  const Tensor<T>& f = raw.values;
  const std::size_t n = f.rows(), m = f.cols();
  AttentionTape<T> local;
  AttentionTape<T>& tp = tape != nullptr ? *tape : local;

  tp.mean_pool = row_mean_forward(f);
  const std::size_t whole[2] = {0, n};
  tp.max_fwd = group_max_forward(f, std::span<const std::size_t>(whole, 2));
  tp.max_pool = tp.max_fwd.out;
  tp.mean_mlp = {};
  tp.max_mlp = {};
  Tensor<T> u_mean = mlp_forward(params, "att", 2, tp.mean_pool, false, &tp.mean_mlp);
  Tensor<T> u_max = mlp_forward(params, "att", 2, tp.max_pool, false, &tp.max_mlp);
  tp.channel_gate = Tensor<T>::matrix(1, m);
  for (std::size_t c = 0; c < m; ++c) tp.channel_gate[c] = static_cast<T>(double(u_mean[c]) + double(u_max[c]));
  sigmoid_inplace(tp.channel_gate);

  tp.channel_scaled = Tensor<T>::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < m; ++c) tp.channel_scaled(i, c) = f(i, c) * tp.channel_gate[c];

  tp.spatial_in = Tensor<T>::matrix(n, 2);
  tp.spatial_argmax.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    T mx = tp.channel_scaled(i, 0);
    std::uint32_t arg = 0;
    for (std::size_t c = 0; c < m; ++c) {
      const T v = tp.channel_scaled(i, c);
      sum += v;
      if (v > mx) {
        mx = v;
        arg = static_cast<std::uint32_t>(c);
      }
    }
    tp.spatial_in(i, 0) = static_cast<T>(sum / static_cast<double>(m));
    tp.spatial_in(i, 1) = mx;
    tp.spatial_argmax[i] = arg;
  }
  tp.spatial_gate = affine_forward(tp.spatial_in, params.at("att.sp.w"), params.at("att.sp.b"));
  sigmoid_inplace(tp.spatial_gate);

  Tensor<T> out = Tensor<T>::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < m; ++c) out(i, c) = tp.channel_scaled(i, c) * tp.spatial_gate[i];
  if (tape != nullptr) tp.features = f;
  return {std::move(out), FeatureStage::refined};
}

template <typename T>
GlobalFeature<T> global_pool(const FeatureMatrix<T>& refined) {
  if (refined.stage != FeatureStage::refined) throw std::invalid_argument("global_pool: expects refined features");
  GlobalFeature<T> g;
  g.pre_norm = row_mean_forward(refined.values);
  g.vector = l2_normalize_forward(g.pre_norm, &g.norm);
  return g;
}

template <typename T>
ShapeForward<T> forward_shape(const ModelParameters<T>& params, const PointCloud& pc, const EncoderConfig& cfg,
                              EncoderTape<T>* tape) {
  ShapeForward<T> out;
  out.features = encode_per_point(params, pc, cfg, tape);
  if (cfg.attention) {
    out.refined = attention_refine(params, out.features, tape ? &tape->att : nullptr);
  } else {
    out.refined = {out.features.values, FeatureStage::refined};
  }
  out.global = global_pool(out.refined);
  if (tape != nullptr) {
    tape->attention = cfg.attention;
    tape->refined = out.refined.values;
    tape->global = out.global;
  }
  return out;
}

template <typename T>
static Tensor<T> attention_backward(const ModelParameters<T>& params, const AttentionTape<T>& tp, const Tensor<T>& dfr,
                                    GradientSet<T>& grads) {
  const Tensor<T>& f = tp.features;
  const std::size_t n = f.rows(), m = f.cols();

  // F^r = F' * s
  Tensor<T> dscaled = Tensor<T>::matrix(n, m);
  Tensor<T> dgate = Tensor<T>::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double ds = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      dscaled(i, c) = dfr(i, c) * tp.spatial_gate[i];
      ds += double(dfr(i, c)) * double(tp.channel_scaled(i, c));
    }
    dgate[i] = static_cast<T>(ds);
  }
  sigmoid_backward(tp.spatial_gate, dgate);
  Tensor<T> dsin = Tensor<T>::matrix(n, 2);
  affine_backward(tp.spatial_in, params.at("att.sp.w"), dgate, &dsin, grads.at("att.sp.w"), grads.at("att.sp.b"));
  const T inv_m = static_cast<T>(1.0 / static_cast<double>(m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m; ++c) dscaled(i, c) += dsin(i, 0) * inv_m;
    dscaled(i, tp.spatial_argmax[i]) += dsin(i, 1);
  }

  // F' = F * c
  Tensor<T> df = Tensor<T>::matrix(n, m);
  Tensor<T> dc = Tensor<T>::matrix(1, m);
  std::vector<double> dca(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m; ++c) {
      df(i, c) = dscaled(i, c) * tp.channel_gate[c];
      dca[c] += double(dscaled(i, c)) * double(f(i, c));
    }
  }
  for (std::size_t c = 0; c < m; ++c) dc[c] = static_cast<T>(dca[c]);
  sigmoid_backward(tp.channel_gate, dc);

  const Tensor<T> dmean = mlp_backward(params, "att", tp.mean_mlp, dc, false, true, grads);
  const Tensor<T> dmax = mlp_backward(params, "att", tp.max_mlp, dc, false, true, grads);
  row_mean_backward(dmean, df);
  group_max_backward(tp.max_fwd, dmax, df);
  return df;
}

template <typename T>
void backward_shape(const ModelParameters<T>& params, const EncoderTape<T>& tp, const Tensor<T>* d_refined,
                    const Tensor<T>* d_global, GradientSet<T>& grads) {
  const std::size_t n = tp.n;
  const std::size_t m = tp.refined.cols();
  Tensor<T> dfr = d_refined != nullptr ? *d_refined : Tensor<T>::matrix(n, m);
  if (dfr.rows() != n || dfr.cols() != m) throw ShapeError("backward_shape: d_refined " + dfr.shape_string());
  if (d_global != nullptr) {
    Tensor<T> dpre(tp.global.pre_norm.shape());
    l2_normalize_backward(tp.global.vector, tp.global.norm, *d_global, dpre);
    row_mean_backward(dpre, dfr);
  }
  Tensor<T> df = tp.attention ? attention_backward(params, tp.att, dfr, grads) : std::move(dfr);

  const std::size_t c1 = tp.l1_channels, c2 = tp.l2_channels;
  const Tensor<T> dup = mlp_backward(params, "up", tp.up_mlp, std::move(df), false, true, grads);
  Tensor<T> dinterp = Tensor<T>::matrix(n, c2);
  Tensor<T> df1 = Tensor<T>::matrix(n, c1);
  concat_cols_backward(dup, dinterp, df1);

  Tensor<T> df2 = Tensor<T>::matrix(tp.centroids.size(), c2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < tp.interp_k; ++s) {
      const double w = tp.interp_w[i * tp.interp_k + s];
      T* dst = df2.data() + tp.interp_idx[i * tp.interp_k + s] * c2;
      const T* src = dinterp.data() + i * c2;
      for (std::size_t c = 0; c < c2; ++c) dst[c] = static_cast<T>(double(dst[c]) + w * double(src[c]));
    }
  }

  Tensor<T> dh2(tp.l2_mlp.outputs.back().shape());
  group_max_backward(tp.l2_pool, df2, dh2);
  const Tensor<T> dx2 = mlp_backward(params, "l2", tp.l2_mlp, std::move(dh2), true, true, grads);
  for (std::size_t row = 0; row < tp.l2_members.size(); ++row) {
    T* dst = df1.data() + tp.l2_members[row] * c1;
    const T* src = dx2.data() + row * (3 + c1) + 3;
    for (std::size_t c = 0; c < c1; ++c) dst[c] += src[c];
  }

  Tensor<T> dh1(tp.l1_mlp.outputs.back().shape());
  group_max_backward(tp.l1_pool, df1, dh1);
  mlp_backward(params, "l1", tp.l1_mlp, std::move(dh1), true, false, grads);
}

#define DISTINCT_INSTANTIATE(T)                                                                                      \
  template struct EncoderTape<T>;                                                                                    \
  template ModelParameters<T> init_encoder<T>(const EncoderConfig&, Rng&);                                           \
  template FeatureMatrix<T> encode_per_point<T>(const ModelParameters<T>&, const PointCloud&, const EncoderConfig&, \
                                                EncoderTape<T>*);                                                    \
  template FeatureMatrix<T> attention_refine<T>(const ModelParameters<T>&, const FeatureMatrix<T>&,                 \
                                                AttentionTape<T>*);                                                  \
  template GlobalFeature<T> global_pool<T>(const FeatureMatrix<T>&);                                                 \
  template ShapeForward<T> forward_shape<T>(const ModelParameters<T>&, const PointCloud&, const EncoderConfig&,     \
                                            EncoderTape<T>*);                                                        \
  template void backward_shape<T>(const ModelParameters<T>&, const EncoderTape<T>&, const Tensor<T>*,               \
                                  const Tensor<T>*, GradientSet<T>&);

DISTINCT_INSTANTIATE(float)
DISTINCT_INSTANTIATE(double)

#undef DISTINCT_INSTANTIATE

}  // namespace distinct
