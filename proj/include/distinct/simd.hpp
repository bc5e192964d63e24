#pragma once

// Dense inner-loop kernels with a scalar reference implementation and an
// AVX2/FMA variant selected once at runtime.

#include <cstddef>
#include <string_view>

namespace distinct::simd {

/// Function table for one instruction-set level.
struct KernelTable {
  std::string_view name;

  // sum_i a[i] * b[i], accumulated in double.
  double (*dot_f32)(const float* a, const float* b, std::size_t n);
  double (*dot_f64)(const double* a, const double* b, std::size_t n);

  // y[i] += alpha * x[i]
  void (*axpy_f32)(float alpha, const float* x, float* y, std::size_t n);
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);

  // out[i] = |xyz[i] - q|^2 for n interleaved 3D points.
  void (*sq_dist3)(const double* xyz, std::size_t n, const double* q, double* out);
};

const KernelTable& scalar_kernels();

/// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// Table chosen at first use. DISTINCT_SIMD=scalar forces the reference path.
const KernelTable& active();

inline double dot(const float* a, const float* b, std::size_t n) { return active().dot_f32(a, b, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot_f64(a, b, n); }
inline void axpy(float alpha, const float* x, float* y, std::size_t n) { active().axpy_f32(alpha, x, y, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy_f64(alpha, x, y, n); }
inline void sq_dist3(const double* xyz, std::size_t n, const double* q, double* out) {
  active().sq_dist3(xyz, n, q, out);
}

}  // namespace distinct::simd
