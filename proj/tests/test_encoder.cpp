#include <cmath>

#include "distinct/encoder.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace distinct;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.channels = 8;
  cfg.l1_widths = {8, 8};
  cfg.l2_widths = {8, 8};
  cfg.up_widths = {8};
  cfg.attention_reduction = 2;
  return cfg;
}

template <typename T>
ModelParameters<T> perturbed(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ModelParameters<T> p = init_encoder<T>(cfg, rng);
  for (auto& [k, v] : p.values)
    for (T& x : v.values()) x += static_cast<T>((k.rfind("att.", 0) == 0 ? 1.0 : 0.05) * rng.normal());
  return p;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("output shapes and unit global feature") {
  const EncoderConfig cfg = EncoderConfig{};
  Rng rng(1);
  const auto p = init_encoder<float>(cfg, rng);
  const PointCloud pc = normalize_unit_sphere(testing::random_cloud(256, 2));
  const auto fw = forward_shape(p, pc, cfg);
  CHECK(fw.features.values.shape() == std::vector<std::size_t>{256, 64});
  CHECK(fw.refined.values.shape() == std::vector<std::size_t>{256, 64});
  CHECK(fw.refined.stage == FeatureStage::refined);
  double n2 = 0.0;
  for (float v : fw.global.vector.values()) n2 += double(v) * v;
  CHECK(n2 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fresh attention gates are exactly one half") {
  const EncoderConfig cfg = small_config();
  Rng rng(3);
  const auto p = init_encoder<float>(cfg, rng);
  const PointCloud pc = normalize_unit_sphere(testing::random_cloud(40, 4));
  const auto fw = forward_shape(p, pc, cfg);
  for (std::size_t i = 0; i < fw.features.values.size(); ++i)
    CHECK(fw.refined.values[i] == fw.features.values[i] * 0.25f);
}

TEST_CASE("disabled attention passes features through") {
  EncoderConfig cfg = small_config();
  cfg.attention = false;
  const auto p = perturbed<double>(cfg, 5);
  const auto fw = forward_shape(p, normalize_unit_sphere(testing::random_cloud(32, 6)), cfg);
  CHECK(fw.refined.values == fw.features.values);
}

TEST_CASE("attention is row-permutation equivariant and keeps signs") {
  const EncoderConfig cfg = small_config();
  const auto p = perturbed<double>(cfg, 7);
  Rng rng(8);
  FeatureMatrix<double> raw{Tensor<double>::matrix(30, 8), FeatureStage::raw};
  for (double& v : raw.values.values()) v = rng.uniform(-1, 1);
  std::vector<std::size_t> perm(30);
  for (std::size_t i = 0; i < 30; ++i) perm[i] = (7 * i + 3) % 30;
  FeatureMatrix<double> shuffled{Tensor<double>::matrix(30, 8), FeatureStage::raw};
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t c = 0; c < 8; ++c) shuffled.values(i, c) = raw.values(perm[i], c);
  const auto a = attention_refine(p, raw), b = attention_refine(p, shuffled);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(b.values(i, c) == doctest::Approx(a.values(perm[i], c)).epsilon(1e-12));
      CHECK(std::signbit(a.values(perm[i], c)) == std::signbit(raw.values(perm[i], c)));
    }
}

TEST_CASE("too few points are rejected") {
  const EncoderConfig cfg = small_config();
  Rng rng(1);
  const auto p = init_encoder<float>(cfg, rng);
  CHECK_THROWS_AS(encode_per_point(p, testing::random_cloud(7, 1), cfg), std::invalid_argument);
}

TEST_CASE("float and double forward passes agree") {
  const EncoderConfig cfg = small_config();
  const auto pd = perturbed<double>(cfg, 9);
  const auto pf = pd.cast<float>();
  const PointCloud pc = normalize_unit_sphere(testing::random_cloud(48, 10));
  const auto a = forward_shape(pd, pc, cfg);
  const auto b = forward_shape(pf, pc, cfg);
  for (std::size_t i = 0; i < a.global.vector.size(); ++i)
    CHECK(b.global.vector[i] == doctest::Approx(a.global.vector[i]).epsilon(1e-4));
}

TEST_CASE("encoder gradient passes a central-difference check") {
  const EncoderConfig cfg = small_config();
  const auto p = perturbed<double>(cfg, 11);
  const PointCloud pc = normalize_unit_sphere(testing::random_cloud(16, 12));
  Rng rng(13);
  std::vector<double> wg(cfg.channels), wr(16 * cfg.channels);
  for (double& v : wg) v = rng.uniform(-1, 1);
  for (double& v : wr) v = rng.uniform(-0.2, 0.2);
  const auto loss = [&](const ModelParameters<double>& q, GradientSet<double>* grads) {
    EncoderTape<double> tape;
    const auto fw = forward_shape(q, pc, cfg, &tape);
    LossProbe out;
    for (std::size_t i = 0; i < wg.size(); ++i) out.loss += wg[i] * fw.global.vector[i];
    for (std::size_t i = 0; i < wr.size(); ++i) out.loss += wr[i] * fw.refined.values[i];
    out.signature = tape.signature();
    if (grads) {
      Tensor<double> dg = Tensor<double>::matrix(1, cfg.channels), dr = Tensor<double>::matrix(16, cfg.channels);
      dg.values() = wg;
      dr.values() = wr;
      backward_shape(q, tape, &dr, &dg, *grads);
    }
    return out;
  };
  GradientSet<double> g = p.zero_gradients();
  loss(p, &g);
  GradCheckOptions opts;
  opts.eps = 1e-4;
  opts.stencil = 4;
  opts.samples = 100000;
  const auto r = gradient_check<double>([&](const ModelParameters<double>& q) { return loss(q, nullptr); }, g, p, opts);
  CAPTURE(r.worst_name);
  CAPTURE(r.worst_index);
  CHECK(r.checked > 300);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("weight names cover affine weights only") {
  Rng rng(1);
  const auto p = init_encoder<float>(small_config(), rng);
  for (const std::string& n : weight_names(p)) {
    CHECK(n.size() > 2);
    CHECK(n.substr(n.size() - 2) == ".w");
  }
}

}  // TEST_SUITE
