#include "distinct/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "distinct/log.hpp"

namespace distinct {
namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::size_t nearest_row(const Matrix& centers, std::span<const double> x) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.rows; ++k) {
    const double d = sq_dist(centers.row(k), x);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

KMeansResult kmeans_once(const Matrix& x, std::size_t k, Rng& rng, std::size_t max_iter, double tol) {
  const std::size_t n = x.rows, dim = x.cols;
  Matrix centers(k, dim);
  // k-means++ seeding.
  std::size_t first = rng.below(n);
  std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(x.row(i), centers.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double run = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        run += d2[i];
        if (u < run) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x.row(i), centers.row(c)));
  }

  std::vector<std::size_t> labels(n, 0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = nearest_row(centers, x.row(i));
    Matrix next(k, dim);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[labels[i]];
      for (std::size_t d = 0; d < dim; ++d) next(labels[i], d) += x(i, d);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Re-seed at the point farthest from its own centroid.
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq_dist(x.row(i), centers.row(labels[i]));
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        std::copy(x.row(far).begin(), x.row(far).end(), next.row(c).begin());
        labels[far] = c;
      } else {
        for (double& v : next.row(c)) v /= static_cast<double>(count[c]);
      }
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) moved = std::max(moved, std::sqrt(sq_dist(next.row(c), centers.row(c))));
    centers = std::move(next);
    if (moved <= tol) break;
  }
  KMeansResult r;
  r.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.labels[i] = nearest_row(centers, x.row(i));
    r.wcss += sq_dist(x.row(i), centers.row(r.labels[i]));
  }
  r.centroids = std::move(centers);
  return r;
}

}  // namespace

void MemoryBank::check_invariants(double tol) const {
  if (assignments.size() != bank.rows) throw std::logic_error("memory bank: assignment count mismatch");
  if (prototypes.rows != clusters) throw std::logic_error("memory bank: prototype count mismatch");
  for (std::size_t j = 0; j < bank.rows; ++j) {
    if (std::abs(norm2(bank.row(j)) - 1.0) > tol) throw std::logic_error("memory bank: row not unit norm");
    if (assignments[j] >= clusters) throw std::logic_error("memory bank: assignment out of range");
  }
  for (std::size_t k = 0; k < prototypes.rows; ++k) {
    if (std::abs(norm2(prototypes.row(k)) - 1.0) > tol) throw std::logic_error("memory bank: prototype not unit norm");
  }
}

std::vector<double> random_unit_vector(std::size_t m, Rng& rng) {
  std::vector<double> v(m);
  do {
    for (double& x : v) x = rng.normal();
  } while (!normalize(v));
  return v;
}

MemoryBank init_bank(std::size_t n_obj, std::size_t m, std::size_t c, Rng& rng, const SpectralConfig& cfg,
                     std::vector<std::string> shape_ids) {
  if (c == 0) throw std::invalid_argument("init_bank: need at least one cluster");
  if (n_obj < c) throw std::invalid_argument("init_bank: fewer shapes than clusters");
  if (!shape_ids.empty() && shape_ids.size() != n_obj) throw std::invalid_argument("init_bank: id count mismatch");
  MemoryBank b;
  b.bank = Matrix(n_obj, m);
  for (std::size_t j = 0; j < n_obj; ++j) {
    const auto v = random_unit_vector(m, rng);
    std::copy(v.begin(), v.end(), b.bank.row(j).begin());
  }
  b.clusters = c;
  b.assignments = spectral_cluster(b.bank, c, cfg);
  b.prototypes = compute_prototypes(b.bank, b.assignments, c, rng);
  b.shape_ids = std::move(shape_ids);
  return b;
}

std::vector<std::size_t> spectral_cluster(const Matrix& bank, std::size_t c, const SpectralConfig& cfg) {
  const std::size_t n = bank.rows;
  if (c == 0 || c > n) throw std::invalid_argument("spectral_cluster: need 1 <= C <= N_obj");
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("spectral_cluster: sigma must be positive");
  if (c == 1) return std::vector<std::size_t>(n, 0);

  Matrix aff(n, n);
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      aff(i, j) = std::exp(-(1.0 - dot(bank.row(i), bank.row(j))) / cfg.sigma);
      degree[i] += aff(i, j);
    }
  }
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < n; ++i)
    if (degree[i] > 1e-300) live.push_back(i);
  if (live.size() < c) throw std::runtime_error("spectral_cluster: affinity graph too sparse for C clusters");

  const std::size_t l = live.size();
  std::vector<double> lap(l * l);
  for (std::size_t a = 0; a < l; ++a) {
    for (std::size_t b = 0; b < l; ++b) {
      const std::size_t i = live[a], j = live[b];
      const double norm_aff = aff(i, j) / std::sqrt(degree[i] * degree[j]);
      lap[a * l + b] = (a == b ? 1.0 : 0.0) - norm_aff;
    }
  }
  const SymmetricEigen eig = jacobi_eigen(std::move(lap), l, 1e-10);
  Matrix embed(l, c);
  for (std::size_t a = 0; a < l; ++a) {
    for (std::size_t k = 0; k < c; ++k) embed(a, k) = eig.vectors[a * l + k];
    normalize(embed.row(a));
  }
  const KMeansResult km = kmeans(embed, c, cfg.seed, cfg.kmeans_restarts);

  std::vector<std::size_t> labels(n, 0);
  for (std::size_t a = 0; a < l; ++a) labels[live[a]] = km.labels[a];
  if (l < n) {
    // Isolated rows join the cluster whose mean direction is closest.
    Rng rng(derive_seed(cfg.seed, {n, c}));
    std::vector<std::size_t> live_labels(km.labels.begin(), km.labels.end());
    Matrix live_bank(l, bank.cols);
    for (std::size_t a = 0; a < l; ++a) std::copy(bank.row(live[a]).begin(), bank.row(live[a]).end(), live_bank.row(a).begin());
    const Matrix protos = compute_prototypes(live_bank, live_labels, c, rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (degree[i] > 1e-300) continue;
      std::size_t best = 0;
      double bd = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < c; ++k) {
        const double s = dot(protos.row(k), bank.row(i));
        if (s > bd) {
          bd = s;
          best = k;
        }
      }
      labels[i] = best;
    }
  }
  return labels;
}

KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t restarts, std::size_t max_iter,
                    double tol) {
  if (k == 0 || k > x.rows) throw std::invalid_argument("kmeans: need 1 <= k <= rows");
  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r) {
    Rng rng(derive_seed(seed, {0x6b6d65616e73ULL, r}));
    KMeansResult cur = kmeans_once(x, k, rng, max_iter, tol);
    if (!have || cur.wcss < best.wcss) {
      best = std::move(cur);
      have = true;
    }
  }
  return best;
}

Matrix compute_prototypes(const Matrix& bank, std::span<const std::size_t> assignments, std::size_t c, Rng& rng) {
  if (assignments.size() != bank.rows) throw std::invalid_argument("compute_prototypes: assignment count mismatch");
  Matrix p(c, bank.cols);
  std::vector<std::size_t> count(c, 0);
  for (std::size_t j = 0; j < bank.rows; ++j) {
    if (assignments[j] >= c) throw std::invalid_argument("compute_prototypes: assignment out of range");
    ++count[assignments[j]];
    for (std::size_t d = 0; d < bank.cols; ++d) p(assignments[j], d) += bank(j, d);
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (count[k] == 0 || !normalize(p.row(k))) {
      log_warning("cluster " + std::to_string(k) + " has no usable members; prototype resampled");
      const auto v = random_unit_vector(bank.cols, rng);
      std::copy(v.begin(), v.end(), p.row(k).begin());
    }
  }
  return p;
}

void bank_update(MemoryBank& bank, std::size_t row, std::span<const double> g) {
  if (row >= bank.bank.rows) throw std::invalid_argument("bank_update: row out of range");
  if (g.size() != bank.bank.cols) throw std::invalid_argument("bank_update: feature width mismatch");
  std::copy(g.begin(), g.end(), bank.bank.row(row).begin());
}

void bank_update(MemoryBank& bank, std::string_view shape_id, std::span<const double> g) {
  const auto it = std::find(bank.shape_ids.begin(), bank.shape_ids.end(), shape_id);
  if (it == bank.shape_ids.end()) throw std::invalid_argument("bank_update: unknown shape '" + std::string(shape_id) + "'");
  bank_update(bank, static_cast<std::size_t>(it - bank.shape_ids.begin()), g);
}

std::vector<std::size_t> align_labels(std::span<const std::size_t> prev, std::span<const std::size_t> next,
                                      std::size_t c) {
  if (prev.size() != next.size()) throw std::invalid_argument("align_labels: length mismatch");
  std::vector<std::size_t> table(c * c, 0);
  for (std::size_t i = 0; i < prev.size(); ++i) ++table[next[i] * c + prev[i]];
  std::vector<std::size_t> map(c, c);
  std::vector<bool> used_next(c, false), used_prev(c, false);
  for (std::size_t step = 0; step < c; ++step) {
    std::size_t bn = c, bp = c, bv = 0;
    for (std::size_t a = 0; a < c; ++a) {
      if (used_next[a]) continue;
      for (std::size_t b = 0; b < c; ++b) {
        if (used_prev[b]) continue;
        if (bn == c || table[a * c + b] > bv) {
          bn = a;
          bp = b;
          bv = table[a * c + b];
        }
      }
    }
    map[bn] = bp;
    used_next[bn] = used_prev[bp] = true;
  }
  std::vector<std::size_t> out(next.size());
  for (std::size_t i = 0; i < next.size(); ++i) out[i] = map[next[i]];
  return out;
}

}  // namespace distinct
