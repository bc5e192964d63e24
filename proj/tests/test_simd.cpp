#include <cmath>
#include <vector>

#include "distinct/random.hpp"
#include "distinct/simd.hpp"
#include "doctest.h"

using namespace distinct;

TEST_SUITE("simd") {

TEST_CASE("active table is one of the known tables") {
  const auto& t = simd::active();
  CHECK((t.name == "scalar" || t.name == "avx2"));
  CHECK(simd::scalar_kernels().name == "scalar");
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const simd::KernelTable* avx = simd::avx2_kernels();
  if (avx == nullptr) {
    MESSAGE("AVX2 unavailable on this machine; equivalence not exercised");
    return;
  }
  const auto& ref = simd::scalar_kernels();
  Rng rng(42);
  for (std::size_t n = 0; n <= 67; ++n) {
    std::vector<double> a(n), b(n), y(n);
    std::vector<float> af(n), bf(n), yf(n);
    double mag = 0.0, magf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(-3, 3);
      b[i] = rng.uniform(-3, 3);
      y[i] = rng.uniform(-3, 3);
      af[i] = static_cast<float>(a[i]);
      bf[i] = static_cast<float>(b[i]);
      yf[i] = static_cast<float>(y[i]);
      mag += std::abs(a[i] * b[i]);
      magf += std::abs(static_cast<double>(af[i]) * bf[i]);
    }
    CAPTURE(n);
    // Only the summation order differs.
    CHECK(std::abs(avx->dot_f64(a.data(), b.data(), n) - ref.dot_f64(a.data(), b.data(), n)) <= 1e-14 * (mag + 1));
    CHECK(std::abs(avx->dot_f32(af.data(), bf.data(), n) - ref.dot_f32(af.data(), bf.data(), n)) <=
          1e-14 * (magf + 1));

    std::vector<double> y1 = y, y2 = y;
    avx->axpy_f64(0.37, a.data(), y1.data(), n);
    ref.axpy_f64(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (std::abs(0.37 * a[i]) + std::abs(y[i])) * 2);
    std::vector<float> yf1 = yf, yf2 = yf;
    avx->axpy_f32(0.37f, af.data(), yf1.data(), n);
    ref.axpy_f32(0.37f, af.data(), yf2.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(yf1[i] - yf2[i]) <= 2.5e-7f * (std::abs(0.37f * af[i]) + std::abs(yf[i])));
    }
  }
}

TEST_CASE("squared distances are bitwise equal across tables") {
  const simd::KernelTable* avx = simd::avx2_kernels();
  if (avx == nullptr) return;
  Rng rng(3);
  for (std::size_t n : {0, 1, 3, 4, 5, 17, 64, 130}) {
    std::vector<double> xyz(3 * n), o1(n), o2(n);
    for (double& v : xyz) v = rng.uniform(-2, 2);
    const double q[3] = {0.1, -0.4, 0.7};
    avx->sq_dist3(xyz.data(), n, q, o1.data());
    simd::scalar_kernels().sq_dist3(xyz.data(), n, q, o2.data());
    CHECK(o1 == o2);
  }
}

}  // TEST_SUITE
