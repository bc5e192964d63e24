#include "distinct/simd.hpp"

namespace distinct::simd {
namespace {

template <typename T>
double dot_ref(const T* a, const T* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename T>
void axpy_ref(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sq_dist3_ref(const double* xyz, std::size_t n, const double* q, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xyz[3 * i] - q[0];
    const double dy = xyz[3 * i + 1] - q[1];
    const double dz = xyz[3 * i + 2] - q[2];
    out[i] = dx * dx + dy * dy + dz * dz;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar", &dot_ref<float>, &dot_ref<double>, &axpy_ref<float>, &axpy_ref<double>, &sq_dist3_ref};
  return table;
}

}  // namespace distinct::simd
