#include "distinct/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "distinct/log.hpp"
#include "distinct/parallel.hpp"

namespace distinct {
namespace {

enum Purpose : std::uint64_t { kInit = 1, kBank, kCluster, kPrototype, kOrder, kTriplet, kAugAnchor, kAugPos, kAugNeg,
                               kCanonical };

template <typename T>
std::vector<double> to_vector(const Tensor<T>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

template <typename T>
Tensor<T> to_tensor(const std::vector<double>& v) {
  Tensor<T> out = Tensor<T>::matrix(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
  return out;
}

void scale_add(std::vector<double>& dst, const std::vector<double>& src, double s) {
  if (dst.empty()) dst.assign(src.size(), 0.0);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += s * src[i];
}

std::size_t count_changes(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

// Rebuilds the bank from jitter-resampled, augmentation-free views, then
// re-clusters. Returns the number of shapes whose aligned label changed.
std::size_t refresh_bank(Checkpoint& ckpt, const Dataset& ds, std::uint64_t stream_epoch) {
  const TrainConfig& cfg = ckpt.config;
  const EncoderConfig enc = cfg.effective_encoder();
  const std::size_t n_obj = ds.size();
  std::vector<std::vector<double>> g(n_obj);
  parallel_for(n_obj, [&](std::size_t j) {
    const DatasetRecord& rec = ds.records[j];
    Rng rng(derive_seed(cfg.seed, {stream_epoch, hash_string(rec.shape_id), kBank}));
    PointCloud view = resample_view(rec, cfg.points, rng, cfg.resample).cloud;
    g[j] = to_vector(forward_shape(ckpt.params, view, enc).global.vector);
  });
  for (std::size_t j = 0; j < n_obj; ++j) bank_update(ckpt.bank, j, g[j]);

  SpectralConfig sc = cfg.spectral;
  sc.seed = derive_seed(cfg.seed, {stream_epoch, kCluster});
  const std::vector<std::size_t> fresh = spectral_cluster(ckpt.bank.bank, cfg.clusters, sc);
  std::vector<std::size_t> aligned = align_labels(ckpt.bank.assignments, fresh, cfg.clusters);
  const std::size_t changes = count_changes(ckpt.bank.assignments, aligned);
  ckpt.bank.assignments = std::move(aligned);
  Rng prng(derive_seed(cfg.seed, {stream_epoch, kPrototype}));
  ckpt.bank.prototypes = compute_prototypes(ckpt.bank.bank, ckpt.bank.assignments, cfg.clusters, prng);
  round_to_float(ckpt.bank.prototypes);
  ckpt.bank.epoch = stream_epoch;
  return changes;
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.cluster_term) && std::isfinite(l.contrastive_term) && std::isfinite(l.weight_decay_term) &&
         std::isfinite(l.total);
}

}  // namespace

Checkpoint initialize(const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.size() < 2) throw std::invalid_argument("training needs at least two shapes");
  Checkpoint ck;
  ck.config = cfg;
  ck.seed = cfg.seed;
  if (cfg.mode == TrainMode::weakly_supervised && ck.config.classes == 0) {
    ck.config.classes = dataset.family_names().size();
  }
  Rng rng(derive_seed(cfg.seed, {kInit}));
  ck.params = init_encoder<float>(cfg.effective_encoder(), rng);
  if (cfg.mode == TrainMode::weakly_supervised) {
    init_supervised_head(ck.params, cfg.encoder.channels, ck.config.classes, rng);
  }
  std::vector<std::string> ids;
  for (const auto& r : dataset.records) ids.push_back(r.shape_id);
  SpectralConfig sc = cfg.spectral;
  sc.seed = derive_seed(cfg.seed, {kInit, kCluster});
  ck.bank = init_bank(dataset.size(), cfg.encoder.channels, cfg.clusters, rng, sc, std::move(ids));
  // Checkpoints store f32; keep the in-memory state exactly representable.
  round_to_float(ck.bank.bank);
  round_to_float(ck.bank.prototypes);
  return ck;
}

template <typename T>
BatchEvaluation<T> evaluate_batch(const ModelParameters<T>& params, const TrainConfig& cfg,
                                  const std::vector<TripletClouds>& batch, std::span<const std::size_t> assignments,
                                  const Matrix& prototypes, std::span<const std::size_t> labels, bool want_grads) {
  if (batch.empty()) throw std::invalid_argument("evaluate_batch: empty batch");
  const EncoderConfig enc = cfg.effective_encoder();
  const bool contrastive = cfg.uses_contrastive();
  const std::size_t roles = contrastive ? 3 : 1;
  const std::size_t b = batch.size();

  std::vector<EncoderTape<T>> tapes(b * roles);
  std::vector<std::vector<double>> g(b * roles);
  parallel_for(b * roles, [&](std::size_t i) {
    const TripletClouds& t = batch[i / roles];
    const PointCloud& pc = (i % roles == 0) ? t.anchor : (i % roles == 1) ? t.positive : t.negative;
    g[i] = to_vector(forward_shape(params, pc, enc, &tapes[i]).global.vector);
  });

  std::vector<Vector> ga(b);
  std::vector<std::size_t> y(b), lab;
  for (std::size_t j = 0; j < b; ++j) {
    ga[j] = g[j * roles];
    y[j] = assignments[batch[j].anchor_index];
    if (cfg.mode == TrainMode::weakly_supervised) lab.push_back(labels[batch[j].anchor_index]);
  }

  BatchEvaluation<T> out;
  std::vector<std::vector<double>> dg(b * roles);
  double cluster_value = 0.0;
  std::optional<HeadLoss<T>> head;
  if (cfg.mode == TrainMode::weakly_supervised) {
    head = supervised_head_loss(params, ga, lab, params.at("head.w").cols());
    cluster_value = head->value;
    for (std::size_t j = 0; j < b; ++j) dg[j * roles] = head->d_global[j];
  } else {
    const BatchLoss cl = cfg.mode == TrainMode::center_contrastive ? center_loss(ga, y, prototypes)
                                                                     : cluster_loss(ga, y, prototypes, cfg.tau);
    cluster_value = cl.value;
    for (std::size_t j = 0; j < b; ++j) dg[j * roles] = cl.grad[j];
  }

  std::uint64_t sig = 0;
  double contrastive_value = 0.0;
  if (contrastive) {
    const double s = cfg.alpha / static_cast<double>(b);
    for (std::size_t j = 0; j < b; ++j) {
      const ContrastiveLoss c = contrastive_loss(g[j * 3], g[j * 3 + 1], g[j * 3 + 2], cfg.margin);
      contrastive_value += c.value;
      sig = signature_mix(sig, c.hinge_active);
      scale_add(dg[j * 3], c.d_anchor, s);
      scale_add(dg[j * 3 + 1], c.d_positive, s);
      scale_add(dg[j * 3 + 2], c.d_negative, s);
    }
    contrastive_value /= static_cast<double>(b);
  }
  for (const auto& t : tapes) sig = signature_mix(sig, t.signature());
  out.signature = sig;

  const std::vector<std::string> wn = weight_names(params);
  const double decay = weight_decay(params, wn);
  out.loss = joint_loss(cluster_value, contrastive_value, decay, cfg.alpha, cfg.beta);
  out.loss.tau = cfg.tau;
  out.loss.margin = cfg.margin;
  if (!want_grads) return out;

  std::vector<GradientSet<T>> parts(b * roles);
  parallel_for(b * roles, [&](std::size_t i) {
    parts[i] = params.zero_gradients();
    const Tensor<T> d = to_tensor<T>(dg[i]);
    backward_shape<T>(params, tapes[i], nullptr, &d, parts[i]);
  });
  out.grads = params.zero_gradients();
  for (const auto& p : parts) accumulate(out.grads, p);
  if (head) accumulate(out.grads, head->grads);
  weight_decay_backward(params, wn, cfg.beta, out.grads);
  return out;
}

TrainResult train(const Dataset& dataset_in, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  for (const auto& r : dataset_in.records) {
    if (r.master_cloud.size() < cfg.points) {
      throw std::invalid_argument("train: shape '" + r.shape_id + "' has fewer master points than N");
    }
  }
  const Dataset* ds = &dataset_in;
  Dataset resized;
  if (dataset_in.points_per_shape != cfg.points) {
    resized = dataset_in;
    resized.points_per_shape = cfg.points;
    ds = &resized;
  }

  TrainResult res;
  res.checkpoint = initialize(*ds, cfg);
  Checkpoint& ck = res.checkpoint;
  const TrainConfig& c = ck.config;
  std::vector<std::size_t> labels;
  if (c.mode == TrainMode::weakly_supervised) labels = ds->family_labels();
  const AdamConfig adam{c.lr, 0.9, 0.999, 1e-8};
  const std::size_t n_obj = ds->size();

  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    std::size_t changes = 0;
    try {
      changes = refresh_bank(ck, *ds, epoch);
    } catch (const std::domain_error& e) {
      throw TrainingAborted("degenerate features at epoch " + std::to_string(epoch) + ": " + e.what(), ck, res.log);
    }
    ck.bank.check_invariants();
    res.log.epoch_changes.push_back(changes);

    std::vector<std::size_t> order(n_obj);
    std::iota(order.begin(), order.end(), 0);
    Rng orng(derive_seed(c.seed, {epoch, kOrder}));
    for (std::size_t i = n_obj; i > 1; --i) std::swap(order[i - 1], order[orng.below(i)]);

    for (std::size_t start = 0, bi = 0; start < n_obj; start += c.batch_size, ++bi) {
      const std::size_t stop = std::min(n_obj, start + c.batch_size);
      std::vector<TripletClouds> batch(stop - start);
      parallel_for(batch.size(), [&](std::size_t k) {
        const std::size_t a = order[start + k];
        const std::uint64_t sid = hash_string(ds->records[a].shape_id);
        Rng trng(derive_seed(c.seed, {epoch, sid, kTriplet}));
        TripletBatch t = build_triplet(*ds, a, ck.bank.assignments, trng, c.resample);
        Rng ra(derive_seed(c.seed, {epoch, sid, kAugAnchor}));
        Rng rp(derive_seed(c.seed, {epoch, sid, kAugPos}));
        Rng rn(derive_seed(c.seed, {epoch, sid, kAugNeg}));
        batch[k].anchor = augment(t.anchor_cloud, ra, c.augment);
        batch[k].positive = augment(t.positive_cloud, rp, c.augment);
        batch[k].negative = augment(t.negative_cloud, rn, c.augment);
        batch[k].anchor_index = a;
      });

      BatchEvaluation<float> ev;
      try {
        ev = evaluate_batch(ck.params, c, batch, ck.bank.assignments, ck.bank.prototypes, labels, true);
      } catch (const std::domain_error& e) {
        throw TrainingAborted("degenerate features at epoch " + std::to_string(epoch) + " batch " + std::to_string(bi) +
                                  ": " + e.what(),
                              ck, res.log);
      }
      if (!finite(ev.loss)) {
        throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(bi),
                              ck, res.log);
      }
      ModelParameters<float> last_good = ck.params;
      try {
        adam_step(ck.params, ev.grads, adam);
      } catch (const NonFiniteGradient& e) {
        ck.params = std::move(last_good);
        throw TrainingAborted(e.what(), ck, res.log);
      }
      res.log.rows.push_back({epoch, bi, ev.loss, changes});
    }
    ck.epoch = epoch;
    if (on_epoch) on_epoch(epoch, res.log, ck);
  }
  // Re-embed with the final parameters so stored prototypes match them.
  if (c.epochs > 0) {
    refresh_bank(ck, *ds, c.epochs + 1);
    ck.bank.epoch = c.epochs;
  }
  return res;
}

ResampledView canonical_resample(const DatasetRecord& record, std::size_t n) {
  Rng rng(derive_seed(hash_string(record.shape_id), {kCanonical}));
  return resample_view(record, n, rng, ResampleOptions{0.0, 0.0});
}

PointCloud canonical_view(const DatasetRecord& record, std::size_t n) { return canonical_resample(record, n).cloud; }

std::vector<double> global_feature(const Checkpoint& ckpt, const PointCloud& pc) {
  return to_vector(forward_shape(ckpt.params, pc, ckpt.config.effective_encoder()).global.vector);
}

std::size_t assign_cluster(const Checkpoint& ckpt, std::span<const double> g) {
  const Vector p = cluster_probability(g, ckpt.bank.prototypes, ckpt.config.tau);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<std::size_t> evaluate_assignments(const Checkpoint& ckpt, const Dataset& dataset) {
  std::vector<std::size_t> out(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t j) {
    out[j] = assign_cluster(ckpt, global_feature(ckpt, canonical_view(dataset.records[j], ckpt.config.points)));
  });
  return out;
}

#define DISTINCT_INSTANTIATE(T)                                                                                    \
  template BatchEvaluation<T> evaluate_batch<T>(const ModelParameters<T>&, const TrainConfig&,                    \
                                                const std::vector<TripletClouds>&, std::span<const std::size_t>,  \
                                                const Matrix&, std::span<const std::size_t>, bool);
DISTINCT_INSTANTIATE(float)
DISTINCT_INSTANTIATE(double)
#undef DISTINCT_INSTANTIATE

}  // namespace distinct
