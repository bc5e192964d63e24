#include "distinct/metrics.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "distinct/encoder.hpp"
#include "distinct/parallel.hpp"

namespace distinct {

CoverageResult match_coverage(std::span<const Vec3> truth, std::span<const Vec3> detected, double r,
                              double diameter) {
  if (r < 0.0) throw std::invalid_argument("match_coverage: r must be non-negative");
  if (!(diameter > 0.0)) throw std::invalid_argument("match_coverage: diameter must be positive");
  CoverageResult res;
  res.r = r;
  res.diameter = diameter;
  const double tol = r * diameter;
  // A detected point can only cover its nearest truth point (ties to the
  // lower index), so each detected point has at most one candidate pair.
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < detected.size(); ++j) {
    std::size_t best = truth.size();
    double best_d = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const double dist = distance(truth[i], detected[j]);
      if (best == truth.size() || dist < best_d) {
        best = i;
        best_d = dist;
      }
    }
    if (best != truth.size() && best_d <= tol) pairs.emplace_back(best_d, best, j);
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> truth_used(truth.size(), false);
  for (const auto& [dist, i, j] : pairs) {
    if (truth_used[i]) continue;
    truth_used[i] = true;
    res.matches.emplace_back(i, j);
  }
  res.covered = res.matches.size();
  return res;
}

FneFpe fne_fpe(std::span<const Vec3> truth, std::span<const Vec3> detected, double r, double diameter) {
  if (truth.empty() || detected.empty()) throw std::invalid_argument("fne_fpe: both point sets must be nonempty");
  const double nc = static_cast<double>(match_coverage(truth, detected, r, diameter).covered);
  return {1.0 - nc / static_cast<double>(truth.size()), 1.0 - nc / static_cast<double>(detected.size())};
}

Vec3 Region::centroid() const {
  if (points.empty()) throw std::invalid_argument("region is empty");
  Vec3 c;
  for (const Vec3& p : points) c += p;
  return c * (1.0 / static_cast<double>(points.size()));
}

double wme(std::span<const std::size_t> marked, std::span<const std::size_t> covered) {
  if (marked.empty()) throw std::invalid_argument("wme: no annotators");
  if (marked.size() != covered.size()) throw std::invalid_argument("wme: annotator count mismatch");
  std::size_t t = 0, c = 0;
  for (std::size_t k = 0; k < marked.size(); ++k) {
    if (covered[k] > marked[k]) throw std::invalid_argument("wme: covered count exceeds marked count");
    t += marked[k];
    c += covered[k];
  }
  if (t == 0) throw std::invalid_argument("wme: no marked regions");
  return 1.0 - static_cast<double>(c) / static_cast<double>(t);
}

double wme(const RegionAnnotationSet& set, double r, double diameter) {
  std::vector<Vec3> det;
  for (const Region& g : set.detected) det.push_back(g.centroid());
  std::vector<std::size_t> marked, covered;
  for (const auto& regions : set.annotators) {
    std::vector<Vec3> human;
    for (const Region& g : regions) human.push_back(g.centroid());
    marked.push_back(human.size());
    covered.push_back(match_coverage(human, det, r, diameter).covered);
  }
  return wme(marked, covered);
}

std::string to_string(PreferenceMode mode) {
  switch (mode) {
    case PreferenceMode::distinctiveness: return "distinctiveness";
    case PreferenceMode::curvature: return "curvature";
    case PreferenceMode::random: return "random";
  }
  return "random";
}

PreferenceMode parse_preference(const std::string& text) {
  if (text == "distinctiveness") return PreferenceMode::distinctiveness;
  if (text == "curvature") return PreferenceMode::curvature;
  if (text == "random") return PreferenceMode::random;
  throw std::invalid_argument("unknown preference mode '" + text + "'");
}

Downsample downsample_with_preference(const PointCloud& pc, std::span<const double> d,
                                      std::span<const double> curvature, PreferenceMode mode, std::size_t k,
                                      Rng& rng) {
  const std::size_t n = pc.size();
  if (k > n) throw std::invalid_argument("downsample_with_preference: K exceeds the point count");
  std::span<const double> scores;
  if (mode == PreferenceMode::distinctiveness) scores = d;
  if (mode == PreferenceMode::curvature) scores = curvature;
  if (mode != PreferenceMode::random && scores.size() != n) {
    throw std::invalid_argument("downsample_with_preference: score length differs from cloud size");
  }
  std::vector<double> w(n, 1.0);
  bool constant = true;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = scores[i] + kPreferenceFloor;
    constant = constant && scores[i] == scores[0];
  }
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  Downsample out;
  for (std::size_t draw = 0; draw < k; ++draw) {
    std::size_t slot = 0;
    if (constant) {
      // Equal weights: exact uniform choice, identical to random mode.
      slot = rng.below(remaining.size());
    } else {
      double total = 0.0;
      for (std::size_t idx : remaining) total += w[idx];
      const double target = rng.uniform() * total;
      double acc = 0.0;
      slot = remaining.size() - 1;
      for (std::size_t s = 0; s < remaining.size(); ++s) {
        acc += w[remaining[s]];
        if (target < acc) {
          slot = s;
          break;
        }
      }
    }
    out.indices.push_back(remaining[slot]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(slot));
  }
  std::sort(out.indices.begin(), out.indices.end());
  out.cloud.shape_id = pc.shape_id;
  for (std::size_t i : out.indices) out.cloud.points.push_back(pc.points[i]);
  return out;
}

RetentionTable cluster_retention(const Checkpoint& ckpt, const Dataset& dataset, std::span<const std::size_t> budgets,
                                 std::span<const PreferenceMode> modes, std::uint64_t seed) {
  const std::size_t n = ckpt.config.points;
  for (std::size_t k : budgets) {
    if (k > n) throw std::invalid_argument("cluster_retention: budget exceeds N");
  }
  RetentionTable table;
  table.modes.assign(modes.begin(), modes.end());
  table.budgets.assign(budgets.begin(), budgets.end());
  const std::size_t n_obj = dataset.size();
  const std::size_t cells = modes.size() * budgets.size();
  std::vector<std::vector<std::uint8_t>> kept(n_obj, std::vector<std::uint8_t>(cells, 0));
  const EncoderConfig enc = ckpt.config.effective_encoder();
  parallel_for(n_obj, [&](std::size_t j) {
    const DatasetRecord& rec = dataset.records[j];
    const PointCloud full = canonical_view(rec, n);
    const ShapeForward<float> fw = forward_shape(ckpt.params, full, enc);
    const std::vector<double> g(fw.global.vector.values().begin(), fw.global.vector.values().end());
    const std::size_t full_label = assign_cluster(ckpt, g);
    const std::vector<double> d = extract(fw.refined.values).values;
    const std::vector<double> curv = estimate_curvature(full, kCurvatureNeighbors);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      for (std::size_t b = 0; b < budgets.size(); ++b) {
        Rng rng(derive_seed(seed, {hash_string(rec.shape_id), static_cast<std::uint64_t>(modes[m]), budgets[b]}));
        const Downsample ds = downsample_with_preference(full, d, curv, modes[m], budgets[b], rng);
        kept[j][m * budgets.size() + b] = assign_cluster(ckpt, global_feature(ckpt, ds.cloud)) == full_label;
      }
    }
  });
  for (std::size_t m = 0; m < modes.size(); ++m) {
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      std::size_t hits = 0;
      for (std::size_t j = 0; j < n_obj; ++j) hits += kept[j][m * budgets.size() + b];
      table.accuracy[{modes[m], budgets[b]}] = n_obj ? static_cast<double>(hits) / static_cast<double>(n_obj) : 0.0;
    }
  }
  return table;
}

RecordDetection detect_record(const Checkpoint& ckpt, const DatasetRecord& record) {
  RecordDetection out;
  out.view = canonical_resample(record, ckpt.config.points);
  const ShapeForward<float> fw = forward_shape(ckpt.params, out.view.cloud, ckpt.config.effective_encoder());
  out.field = extract(fw.refined.values);
  out.field.shape_id = record.shape_id;
  return out;
}

SubstructureContrast substructure_contrast(const Checkpoint& ckpt, const Dataset& dataset) {
  const std::size_t n_obj = dataset.size();
  std::vector<double> masked(n_obj, 0.0), unmasked(n_obj, 0.0);
  std::vector<std::uint8_t> usable(n_obj, 0);
  parallel_for(n_obj, [&](std::size_t j) {
    const DatasetRecord& rec = dataset.records[j];
    const RecordDetection det = detect_record(ckpt, rec);
    double sm = 0.0, su = 0.0;
    std::size_t nm = 0, nu = 0;
    for (std::size_t i = 0; i < det.view.source.size(); ++i) {
      if (rec.substructure_mask[det.view.source[i]]) {
        sm += det.field.values[i];
        ++nm;
      } else {
        su += det.field.values[i];
        ++nu;
      }
    }
    if (nm == 0 || nu == 0) return;
    usable[j] = 1;
    masked[j] = sm / static_cast<double>(nm);
    unmasked[j] = su / static_cast<double>(nu);
  });
  SubstructureContrast out;
  for (std::size_t j = 0; j < n_obj; ++j) {
    if (!usable[j]) continue;
    out.masked_mean += masked[j];
    out.unmasked_mean += unmasked[j];
    ++out.shapes;
  }
  if (out.shapes == 0) return out;
  out.masked_mean /= static_cast<double>(out.shapes);
  out.unmasked_mean /= static_cast<double>(out.shapes);
  out.ratio = out.unmasked_mean > 0.0 ? out.masked_mean / out.unmasked_mean
                                      : std::numeric_limits<double>::infinity();
  return out;
}

double best_permutation_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth,
                                 std::size_t c) {
  if (pred.size() != truth.size()) throw std::invalid_argument("best_permutation_accuracy: length mismatch");
  if (c == 0 || c > 8) throw std::invalid_argument("best_permutation_accuracy: C must be in [1, 8]");
  if (pred.empty()) return 1.0;
  std::size_t tmax = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= c) throw std::invalid_argument("best_permutation_accuracy: predicted label out of range");
    tmax = std::max(tmax, truth[i]);
  }
  // Contingency counts, then the best label map over all permutations.
  std::vector<std::vector<std::size_t>> cont(c, std::vector<std::size_t>(tmax + 1, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++cont[pred[i]][truth[i]];
  std::vector<std::size_t> perm(std::max(c, tmax + 1));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t p = 0; p < c; ++p)
      if (perm[p] <= tmax) hits += cont[p][perm[p]];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::size_t, std::size_t>, double> nij;
  std::map<std::size_t, double> ai, bj;
  for (std::size_t i = 0; i < n; ++i) {
    nij[{a[i], b[i]}] += 1.0;
    ai[a[i]] += 1.0;
    bj[b[i]] += 1.0;
  }
  const auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [k, v] : nij) sum_ij += c2(v);
  for (const auto& [k, v] : ai) sum_a += c2(v);
  for (const auto& [k, v] : bj) sum_b += c2(v);
  const double expected = sum_a * sum_b / c2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

}  // namespace distinct
