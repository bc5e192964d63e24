#include <cmath>

#include "distinct/io.hpp"
#include "distinct/pipeline.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace distinct;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.points = 32;
  cfg.encoder.channels = 8;
  cfg.encoder.l1_widths = {8};
  cfg.encoder.l2_widths = {8};
  cfg.encoder.up_widths = {8};
  cfg.encoder.attention_reduction = 2;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.seed = 5;
  return cfg;
}

Dataset tiny_dataset() { return build_dataset(preset("twin-vs-quad", 4), 32, 3); }

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config text round-trips") {
  TrainConfig cfg = tiny_config();
  cfg.lr = 0.0123456789;
  cfg.mode = TrainMode::center_contrastive;
  cfg.augment.rotate_up = false;
  cfg.encoder.l2_widths = {4, 5, 6};
  const std::string text = serialize_config(cfg);
  const TrainConfig back = apply_config(TrainConfig{}, parse_key_values(text));
  CHECK(serialize_config(back) == text);
  CHECK(back.lr == cfg.lr);
  CHECK(back.mode == TrainMode::center_contrastive);
}

TEST_CASE("config errors") {
  CHECK(parse_key_values("# comment\n\nlr = 0.5\n").at("lr") == "0.5");
  try {
    parse_key_values("lr=1\nbroken line\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config(TrainConfig{}, {{"no_such_key", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_config(TrainConfig{}, {{"lr", "fast"}}), ConfigError);
  CHECK_THROWS_AS(apply_config(TrainConfig{}, {{"epochs", "-3"}}), ConfigError);
  CHECK_THROWS_AS(apply_config(TrainConfig{}, {{"lr", "0"}}).validate(), ConfigError);
  CHECK_THROWS_AS(apply_config(TrainConfig{}, {{"mode", "magic"}}), ConfigError);
}

TEST_CASE("mode names") {
  for (TrainMode m : {TrainMode::unsupervised, TrainMode::weakly_supervised, TrainMode::without_attention,
                      TrainMode::without_contrastive, TrainMode::center_contrastive}) {
    CHECK(parse_mode(to_string(m)) == m);
  }
  CHECK(parse_mode("ablation:w/o-Cont") == TrainMode::without_contrastive);
  TrainConfig cfg;
  cfg.mode = TrainMode::without_attention;
  CHECK_FALSE(cfg.effective_encoder().attention);
  cfg.mode = TrainMode::without_contrastive;
  CHECK_FALSE(cfg.uses_contrastive());
  cfg.mode = TrainMode::weakly_supervised;
  CHECK_FALSE(cfg.uses_contrastive());
}

TEST_CASE("training is deterministic") {
  const Dataset ds = tiny_dataset();
  const TrainConfig cfg = tiny_config();
  const TrainResult a = train(ds, cfg);
  const TrainResult b = train(ds, cfg);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  CHECK(a.log.rows.size() == 2 * 3);  // 8 shapes in batches of 3
  CHECK(a.log.epoch_changes.size() == 2);
  CHECK(a.checkpoint.epoch == 2);
  CHECK_NOTHROW(a.checkpoint.bank.check_invariants());
  for (const auto& row : a.log.rows) {
    CHECK(row.loss.total == doctest::Approx(row.loss.cluster_term + cfg.alpha * row.loss.contrastive_term +
                                            cfg.beta * row.loss.weight_decay_term));
  }
  TrainConfig other = cfg;
  other.seed = 6;
  CHECK(serialize_checkpoint(train(ds, other).checkpoint) != serialize_checkpoint(a.checkpoint));
}

TEST_CASE("ablation modes shape the loss") {
  const Dataset ds = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;

  cfg.mode = TrainMode::without_contrastive;
  for (const auto& row : train(ds, cfg).log.rows) CHECK(row.loss.contrastive_term == 0.0);

  cfg.mode = TrainMode::center_contrastive;
  for (const auto& row : train(ds, cfg).log.rows) {
    // Center loss of unit vectors is at most half the squared diameter.
    CHECK(row.loss.cluster_term <= 2.0);
    CHECK(row.loss.contrastive_term > 0.0);
  }

  cfg.mode = TrainMode::weakly_supervised;
  const TrainResult weak = train(ds, cfg);
  CHECK(weak.checkpoint.config.classes == 2);
  CHECK(weak.checkpoint.params.contains("head.w"));
}

TEST_CASE("float and double batch evaluations agree") {
  const Dataset ds = tiny_dataset();
  const TrainConfig cfg = tiny_config();
  const Checkpoint ck = initialize(ds, cfg);
  std::vector<TripletClouds> batch;
  for (std::size_t j = 0; j < 3; ++j) {
    Rng rng(j + 1);
    TripletBatch t = build_triplet(ds, j, ck.bank.assignments, rng, cfg.resample);
    batch.push_back({t.anchor_cloud, t.positive_cloud, t.negative_cloud, j});
  }
  const auto pd = ck.params.cast<double>();
  const auto ef = evaluate_batch(ck.params, cfg, batch, ck.bank.assignments, ck.bank.prototypes, {}, true);
  const auto ed = evaluate_batch(pd, cfg, batch, ck.bank.assignments, ck.bank.prototypes, {}, true);
  CHECK(ef.loss.total == doctest::Approx(ed.loss.total).epsilon(1e-4));
  for (const auto& [name, g] : ed.grads) {
    const auto& gf = ef.grads.at(name);
    double scale = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      scale = std::max(scale, std::abs(g[i]));
      diff = std::max(diff, std::abs(g[i] - static_cast<double>(gf[i])));
    }
    CHECK_MESSAGE(diff <= 1e-3 * (scale + 1e-3), name);
  }
}

TEST_CASE("a diverging run aborts with the last good state") {
  const Dataset ds = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.lr = 1e30;
  cfg.epochs = 5;
  try {
    train(ds, cfg);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    for (const auto& [name, t] : e.last_good.params.values) CHECK_MESSAGE(t.all_finite(), name);
  }
}

TEST_CASE("inference views and assignments") {
  const Dataset ds = tiny_dataset();
  const TrainConfig cfg = tiny_config();
  const Checkpoint ck = initialize(ds, cfg);
  const PointCloud a = canonical_view(ds.records[0], 32), b = canonical_view(ds.records[0], 32);
  CHECK(a.points == b.points);
  const auto g = global_feature(ck, a);
  double n2 = 0.0;
  for (double v : g) n2 += v * v;
  CHECK(n2 == doctest::Approx(1.0).epsilon(1e-5));
  for (std::size_t y : evaluate_assignments(ck, ds)) CHECK(y < cfg.clusters);

  Dataset small = ds;
  small.records.resize(1);
  CHECK_THROWS_AS(initialize(small, cfg), std::invalid_argument);
  TrainConfig big = cfg;
  big.points = 1000;
  CHECK_THROWS_AS(train(ds, big), std::invalid_argument);
}

}  // TEST_SUITE
