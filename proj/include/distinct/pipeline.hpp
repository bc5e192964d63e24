#pragma once

// Training loop: per-epoch bank refresh and re-clustering, triplet batches,
// joint-loss optimization with Adam, and inference-time assignment.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "distinct/clustering.hpp"
#include "distinct/config.hpp"
#include "distinct/encoder.hpp"
#include "distinct/objective.hpp"
#include "distinct/synth.hpp"

namespace distinct {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  TrainConfig config;
  ModelParameters<float> params;
  MemoryBank bank;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

/// One row of the metrics log. assignment_changes is the epoch's count,
/// repeated on each of its batches.
struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  LossBreakdown loss;
  std::size_t assignment_changes = 0;
};

struct TrainLog {
  std::vector<BatchRecord> rows;
  std::vector<std::size_t> epoch_changes;  ///< one entry per epoch
};

/// Raised on a non-finite loss or gradient; carries the last good state.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, Checkpoint last_good, TrainLog log)
      : std::runtime_error(what), last_good(std::move(last_good)), log(std::move(log)) {}
  Checkpoint last_good;
  TrainLog log;
};

/// Fresh parameters (plus the supervised head in weak mode) and a random bank.
Checkpoint initialize(const Dataset& dataset, const TrainConfig& cfg);

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

using EpochCallback = std::function<void(std::size_t epoch, const TrainLog&, const Checkpoint&)>;

TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Clouds of one training example. Positive and negative are ignored when the
/// mode has no contrastive term.
struct TripletClouds {
  PointCloud anchor, positive, negative;
  std::size_t anchor_index = 0;
};

template <typename T>
struct BatchEvaluation {
  LossBreakdown loss;
  GradientSet<T> grads;
  std::uint64_t signature = 0;
};

/// Joint loss of one batch and its parameter gradient. `assignments` and
/// `labels` are indexed by TripletClouds::anchor_index; labels are only read in
/// weakly-supervised mode.
template <typename T>
BatchEvaluation<T> evaluate_batch(const ModelParameters<T>& params, const TrainConfig& cfg,
                                  const std::vector<TripletClouds>& batch, std::span<const std::size_t> assignments,
                                  const Matrix& prototypes, std::span<const std::size_t> labels, bool want_grads);

/// Deterministic jitter-free N-point view of a record.
PointCloud canonical_view(const DatasetRecord& record, std::size_t n);
/// The same view with the master index of every point.
ResampledView canonical_resample(const DatasetRecord& record, std::size_t n);

/// Unit global feature of a cloud under the checkpoint's encoder.
std::vector<double> global_feature(const Checkpoint& ckpt, const PointCloud& pc);

/// argmax over stored prototypes of the cluster probability.
std::size_t assign_cluster(const Checkpoint& ckpt, std::span<const double> g);

/// Per-shape cluster id using canonical views.
std::vector<std::size_t> evaluate_assignments(const Checkpoint& ckpt, const Dataset& dataset);

}  // namespace distinct
