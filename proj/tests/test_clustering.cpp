#include <Eigen/Dense>
#include <cmath>

#include "distinct/clustering.hpp"
#include "distinct/metrics.hpp"
#include "doctest.h"

using namespace distinct;

namespace {

Matrix bundles(std::size_t per, const std::vector<std::vector<double>>& axes, double spread, Rng& rng) {
  const std::size_t m = axes[0].size();
  Matrix x(per * axes.size(), m);
  for (std::size_t a = 0; a < axes.size(); ++a)
    for (std::size_t i = 0; i < per; ++i) {
      auto row = x.row(a * per + i);
      for (std::size_t c = 0; c < m; ++c) row[c] = axes[a][c] + spread * rng.normal();
      normalize(row);
    }
  return x;
}

// Smallest within-cluster sum of squares over every labeling.
double brute_force_wcss(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows;
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= k;
  double best = 1e300;
  std::vector<std::size_t> lab(n);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      lab[i] = c % k;
      c /= k;
    }
    double w = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      std::vector<double> mean(x.cols, 0.0);
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (lab[i] == g) {
          ++cnt;
          for (std::size_t d = 0; d < x.cols; ++d) mean[d] += x(i, d);
        }
      if (cnt == 0) continue;
      for (double& v : mean) v /= static_cast<double>(cnt);
      for (std::size_t i = 0; i < n; ++i)
        if (lab[i] == g)
          for (std::size_t d = 0; d < x.cols; ++d) w += (x(i, d) - mean[d]) * (x(i, d) - mean[d]);
    }
    best = std::min(best, w);
  }
  return best;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("jacobi eigen-decomposition matches an eigen-solver oracle") {
  Rng rng(1);
  for (std::size_t n : {1, 2, 5, 12, 30}) {
    std::vector<double> a(n * n);
    Eigen::MatrixXd e(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double v = rng.uniform(-1, 1);
        a[i * n + j] = a[j * n + i] = v;
        e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        e(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    const SymmetricEigen mine = jacobi_eigen(a, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(e);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(mine.values[k] == doctest::Approx(ref.eigenvalues()(static_cast<Eigen::Index>(k))).epsilon(1e-9).scale(1.0));
      // A v = lambda v for each returned column.
      for (std::size_t i = 0; i < n; ++i) {
        double av = 0.0;
        for (std::size_t j = 0; j < n; ++j) av += a[i * n + j] * mine.vectors[j * n + k];
        CHECK(av == doctest::Approx(mine.values[k] * mine.vectors[i * n + k]).epsilon(1e-8).scale(1.0));
      }
    }
  }
}

TEST_CASE("spectral clustering separates antipodal bundles") {
  Rng rng(2);
  std::vector<double> axis(16, 0.0);
  axis[3] = 1.0;
  std::vector<double> neg = axis;
  neg[3] = -1.0;
  const Matrix x = bundles(10, {axis, neg}, 0.02, rng);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) CHECK(1.0 - dot(x.row(i), x.row(j)) < 0.02);
  const auto labels = spectral_cluster(x, 2);
  std::vector<std::size_t> truth(20);
  for (std::size_t i = 10; i < 20; ++i) truth[i] = 1;
  CHECK(adjusted_rand_index(labels, truth) == 1.0);
}

TEST_CASE("spectral clustering is invariant to a common rotation") {
  Rng rng(3);
  const Matrix x = bundles(8, {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}}, 0.2, rng);
  Eigen::MatrixXd r = Eigen::MatrixXd::Random(4, 4);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(r).householderQ();
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += q(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) * x(i, k);
      y(i, c) = s;
    }
  CHECK(adjusted_rand_index(spectral_cluster(x, 3), spectral_cluster(y, 3)) == doctest::Approx(1.0));
}

TEST_CASE("k-means recovers separated blobs and the optimal partition") {
  Rng rng(4);
  Matrix x(9, 2);
  const double centers[3][2] = {{0, 0}, {5, 5}, {-5, 5}};
  std::vector<std::size_t> truth(9);
  for (std::size_t i = 0; i < 9; ++i) {
    truth[i] = i / 3;
    x(i, 0) = centers[i / 3][0] + 0.3 * rng.normal();
    x(i, 1) = centers[i / 3][1] + 0.3 * rng.normal();
  }
  const KMeansResult km = kmeans(x, 3, 11);
  CHECK(adjusted_rand_index(km.labels, truth) == 1.0);
  CHECK(km.wcss == doctest::Approx(brute_force_wcss(x, 3)).epsilon(1e-12));

  // Unstructured data: restarts still reach the exhaustive optimum.
  Matrix u(8, 2);
  for (double& v : u.data) v = rng.uniform(-1, 1);
  CHECK(kmeans(u, 2, 5, 20).wcss == doctest::Approx(brute_force_wcss(u, 2)).epsilon(1e-9));
}

TEST_CASE("prototypes and memory bank") {
  Rng rng(5);
  const Matrix x = bundles(5, {{1, 0, 0}, {0, 1, 0}}, 0.1, rng);
  const std::vector<std::size_t> lab = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const Matrix p = compute_prototypes(x, lab, 3, rng);
  for (std::size_t k = 0; k < 3; ++k) CHECK(norm2(p.row(k)) == doctest::Approx(1.0));
  CHECK(p(0, 0) > 0.9);
  CHECK(p(1, 1) > 0.9);

  MemoryBank bank = init_bank(12, 8, 3, rng);
  CHECK_NOTHROW(bank.check_invariants());
  CHECK(bank.assignments.size() == 12);
  CHECK(bank.shape_ids.empty());
  std::vector<double> g(8, 0.0);
  g[2] = 1.0;
  bank_update(bank, 4, g);
  CHECK(bank.bank(4, 2) == 1.0);
  CHECK_NOTHROW(bank.check_invariants());
  bank.bank(0, 0) += 1.0;
  CHECK_THROWS_AS(bank.check_invariants(), std::logic_error);
}

TEST_CASE("label alignment undoes a permutation") {
  const std::vector<std::size_t> prev = {0, 0, 1, 1, 2, 2, 2};
  const std::vector<std::size_t> next = {2, 2, 0, 0, 1, 1, 0};
  CHECK(align_labels(prev, next, 3) == std::vector<std::size_t>{0, 0, 1, 1, 2, 2, 1});
}

}  // TEST_SUITE
