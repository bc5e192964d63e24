#include "distinct/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace distinct {
namespace {

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t k = 0; k < out.rows; ++k) {
    if (!normalize(out.row(k))) throw std::invalid_argument("prototype row " + std::to_string(k) + " is zero");
  }
  return out;
}

void check_batch(const std::vector<Vector>& g, std::span<const std::size_t> y, const Matrix& prototypes) {
  if (g.empty()) throw std::invalid_argument("loss: empty batch");
  if (y.size() != g.size()) throw std::invalid_argument("loss: assignment count does not match batch");
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g[j].size() != prototypes.cols) throw ShapeError("loss: feature width does not match prototypes");
    if (y[j] >= prototypes.rows) throw std::invalid_argument("loss: assignment out of range");
  }
}

}  // namespace

Vector cluster_probability(std::span<const double> g, const Matrix& prototypes, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("cluster_probability: temperature must be positive");
  if (g.size() != prototypes.cols) throw ShapeError("cluster_probability: feature width does not match prototypes");
  const Matrix p = normalized_rows(prototypes);
  Vector logits(p.rows);
  for (std::size_t k = 0; k < p.rows; ++k) logits[k] = dot(p.row(k), g);
  return softmax_temperature(logits, tau);
}

BatchLoss cluster_loss(const std::vector<Vector>& g, std::span<const std::size_t> y, const Matrix& prototypes,
                       double tau) {
  check_batch(g, y, prototypes);
  if (!(tau > 0.0)) throw std::invalid_argument("cluster_loss: temperature must be positive");
  const Matrix p = normalized_rows(prototypes);
  const double inv_b = 1.0 / static_cast<double>(g.size());
  BatchLoss out;
  out.grad.resize(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    Vector logits(p.rows);
    for (std::size_t k = 0; k < p.rows; ++k) logits[k] = dot(p.row(k), g[j]);
    const Vector prob = softmax_temperature(logits, tau);
    // -log p_y computed via log-sum-exp for accuracy near p_y = 1.
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double z = 0.0;
    for (double l : logits) z += std::exp((l - mx) / tau);
    out.value += (std::log(z) - (logits[y[j]] - mx) / tau) * inv_b;
    // d/dg = (sum_k p_k proto_k - proto_y) / tau
    Vector& d = out.grad[j];
    d.assign(p.cols, 0.0);
    for (std::size_t k = 0; k < p.rows; ++k) {
      const double w = (prob[k] - (k == y[j] ? 1.0 : 0.0)) * inv_b / tau;
      for (std::size_t c = 0; c < p.cols; ++c) d[c] += w * p(k, c);
    }
  }
  return out;
}

BatchLoss center_loss(const std::vector<Vector>& g, std::span<const std::size_t> y, const Matrix& prototypes) {
  check_batch(g, y, prototypes);
  const double inv_b = 1.0 / static_cast<double>(g.size());
  BatchLoss out;
  out.grad.resize(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const auto proto = prototypes.row(y[j]);
    out.grad[j].resize(g[j].size());
    for (std::size_t c = 0; c < g[j].size(); ++c) {
      const double diff = g[j][c] - proto[c];
      out.value += 0.5 * diff * diff * inv_b;
      out.grad[j][c] = diff * inv_b;
    }
  }
  return out;
}

ContrastiveLoss contrastive_loss(std::span<const double> g, std::span<const double> g_pos,
                                 std::span<const double> g_neg, double margin) {
  if (g.size() != g_pos.size() || g.size() != g_neg.size()) throw ShapeError("contrastive_loss: width mismatch");
  const std::size_t m = g.size();
  ContrastiveLoss out;
  out.d_anchor.assign(m, 0.0);
  out.d_positive.assign(m, 0.0);
  out.d_negative.assign(m, 0.0);
  double dp = 0.0, dn = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    dp += (g[c] - g_pos[c]) * (g[c] - g_pos[c]);
    dn += (g[c] - g_neg[c]) * (g[c] - g_neg[c]);
  }
  dp = std::sqrt(dp);
  dn = std::sqrt(dn);
  out.value = dp;
  if (dp > 0.0) {
    for (std::size_t c = 0; c < m; ++c) {
      const double u = (g[c] - g_pos[c]) / dp;
      out.d_anchor[c] += u;
      out.d_positive[c] -= u;
    }
  }
  if (margin - dn > 0.0) {
    out.hinge_active = true;
    out.value += margin - dn;
    if (dn > 0.0) {
      for (std::size_t c = 0; c < m; ++c) {
        const double u = (g[c] - g_neg[c]) / dn;
        out.d_anchor[c] -= u;
        out.d_negative[c] += u;
      }
    }
  }
  return out;
}

TripletBatch build_triplet(const Dataset& dataset, std::size_t anchor, std::span<const std::size_t> assignments,
                           Rng& rng, const ResampleOptions& resample) {
  const std::size_t n_obj = dataset.size();
  if (anchor >= n_obj) throw std::invalid_argument("build_triplet: anchor out of range");
  if (assignments.size() != n_obj) throw std::invalid_argument("build_triplet: assignment count mismatch");
  const DatasetRecord& rec = dataset.records[anchor];
  TripletBatch t;
  t.anchor_index = anchor;
  t.anchor_id = rec.shape_id;
  t.anchor_cloud = resample_view(rec, dataset.points_per_shape, rng, resample).cloud;
  t.positive_cloud = resample_view(rec, dataset.points_per_shape, rng, resample).cloud;

  std::vector<std::size_t> eligible;
  for (std::size_t j = 0; j < n_obj; ++j)
    if (assignments[j] != assignments[anchor]) eligible.push_back(j);
  if (eligible.empty()) {
    t.fallback_negative = true;
    for (std::size_t j = 0; j < n_obj; ++j)
      if (j != anchor) eligible.push_back(j);
  }
  if (eligible.empty()) throw std::invalid_argument("build_triplet: dataset has a single shape");
  t.negative_index = eligible[rng.below(eligible.size())];
  t.negative_id = dataset.records[t.negative_index].shape_id;
  t.negative_cloud = resample_view(dataset.records[t.negative_index], dataset.points_per_shape, rng, resample).cloud;
  return t;
}

template <typename T>
void init_supervised_head(ModelParameters<T>& params, std::size_t channels, std::size_t classes, Rng& rng) {
  init_affine(params, "head", channels, classes, rng);
}

template <typename T>
HeadLoss<T> supervised_head_loss(const ModelParameters<T>& params, const std::vector<Vector>& g,
                                 std::span<const std::size_t> labels, std::size_t classes) {
  if (g.empty()) throw std::invalid_argument("supervised_head_loss: empty batch");
  if (labels.size() != g.size()) throw std::invalid_argument("supervised_head_loss: label count mismatch");
  const Tensor<T>& w = params.at("head.w");
  const Tensor<T>& b = params.at("head.b");
  if (w.cols() != classes) throw ShapeError("supervised_head_loss: head has " + std::to_string(w.cols()) + " outputs");
  const std::size_t m = w.rows();
  const double inv_b = 1.0 / static_cast<double>(g.size());
  HeadLoss<T> out;
  out.grads.emplace("head.w", Tensor<T>(w.shape()));
  out.grads.emplace("head.b", Tensor<T>(b.shape()));
  Tensor<T>& dw = out.grads.at("head.w");
  Tensor<T>& db = out.grads.at("head.b");
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (labels[j] >= classes) {
      throw std::invalid_argument("supervised_head_loss: label " + std::to_string(labels[j]) + " >= " +
                                  std::to_string(classes));
    }
    if (g[j].size() != m) throw ShapeError("supervised_head_loss: feature width mismatch");
    Vector logits(classes);
    for (std::size_t k = 0; k < classes; ++k) {
      double z = b[k];
      for (std::size_t c = 0; c < m; ++c) z += g[j][c] * double(w(c, k));
      logits[k] = z;
    }
    const Vector p = softmax_temperature(logits, 1.0);
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    out.value += (std::log(z) - (logits[labels[j]] - mx)) * inv_b;
    Vector dz(classes);
    for (std::size_t k = 0; k < classes; ++k) dz[k] = (p[k] - (k == labels[j] ? 1.0 : 0.0)) * inv_b;
    Vector dg(m, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t k = 0; k < classes; ++k) {
        dw(c, k) += static_cast<T>(g[j][c] * dz[k]);
        dg[c] += dz[k] * double(w(c, k));
      }
    }
    for (std::size_t k = 0; k < classes; ++k) db[k] += static_cast<T>(dz[k]);
    out.d_global.push_back(std::move(dg));
  }
  return out;
}

LossBreakdown joint_loss(double cluster, double contrastive, double decay, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("joint_loss: weights must be non-negative");
  LossBreakdown b;
  b.cluster_term = cluster;
  b.contrastive_term = contrastive;
  b.weight_decay_term = decay;
  b.alpha = alpha;
  b.beta = beta;
  b.total = cluster + alpha * contrastive + beta * decay;
  return b;
}

template <typename T>
double weight_decay(const ModelParameters<T>& params, const std::vector<std::string>& names) {
  double s = 0.0;
  for (const auto& n : names)
    for (T v : params.at(n).values()) s += double(v) * double(v);
  return s;
}

template <typename T>
void weight_decay_backward(const ModelParameters<T>& params, const std::vector<std::string>& names, double scale,
                           GradientSet<T>& grads) {
  for (const auto& n : names) {
    const Tensor<T>& w = params.at(n);
    Tensor<T>& g = grads.at(n);
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += static_cast<T>(2.0 * scale * double(w[i]));
  }
}

#define DISTINCT_INSTANTIATE(T)                                                                                    \
  template void init_supervised_head<T>(ModelParameters<T>&, std::size_t, std::size_t, Rng&);                      \
  template HeadLoss<T> supervised_head_loss<T>(const ModelParameters<T>&, const std::vector<Vector>&,              \
                                               std::span<const std::size_t>, std::size_t);                         \
  template double weight_decay<T>(const ModelParameters<T>&, const std::vector<std::string>&);                     \
  template void weight_decay_backward<T>(const ModelParameters<T>&, const std::vector<std::string>&, double,        \
                                         GradientSet<T>&);

DISTINCT_INSTANTIATE(float)
DISTINCT_INSTANTIATE(double)

#undef DISTINCT_INSTANTIATE

}  // namespace distinct
