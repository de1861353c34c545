// SPDX-License-Identifier: Apache-2.0
#include "coisac/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define COISAC_HAVE_X86 1
#else
#define COISAC_HAVE_X86 0
#endif

namespace coisac::simd {

#if COISAC_HAVE_X86
namespace {

#define COISAC_AVX2 __attribute__((target("avx2,fma")))

COISAC_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

COISAC_AVX2 double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

COISAC_AVX2 void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

COISAC_AVX2 void gemv_avx2(const double* W, const double* x, const double* b, double* y,
                           std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot_avx2(W + r * cols, x, cols) + (b ? b[r] : 0.0);
  }
}

COISAC_AVX2 void gemv_t_acc_avx2(const double* W, const double* g, double* dx, std::size_t rows,
                                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(g[r], W + r * cols, dx, cols);
}

COISAC_AVX2 void ger_acc_avx2(const double* g, const double* x, double* dW, std::size_t rows,
                              std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(g[r], x, dW + r * cols, cols);
}

// Two complex values per register: [re0, im0, re1, im1].
COISAC_AVX2 std::complex<double> cdotc_avx2(const std::complex<double>* x,
                                            const std::complex<double>* y, std::size_t n) {
  const double* xp = reinterpret_cast<const double*>(x);
  const double* yp = reinterpret_cast<const double*>(y);
  __m256d acc_re = _mm256_setzero_pd();
  __m256d acc_im = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d vx = _mm256_loadu_pd(xp + 2 * i);
    const __m256d vy = _mm256_loadu_pd(yp + 2 * i);
    acc_re = _mm256_fmadd_pd(vx, vy, acc_re);
    // [yi, yr, ...]: products give [xr*yi, xi*yr, ...]
    acc_im = _mm256_fmadd_pd(vx, _mm256_permute_pd(vy, 0b0101), acc_im);
  }
  double re = hsum(acc_re);
  alignas(32) double im_parts[4];
  _mm256_store_pd(im_parts, acc_im);
  double im = (im_parts[0] - im_parts[1]) + (im_parts[2] - im_parts[3]);
  for (; i < n; ++i) {
    re += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
    im += x[i].real() * y[i].imag() - x[i].imag() * y[i].real();
  }
  return {re, im};
}

COISAC_AVX2 double cnorm2_avx2(const std::complex<double>* x, std::size_t n) {
  return dot_avx2(reinterpret_cast<const double*>(x), reinterpret_cast<const double*>(x), 2 * n);
}

#undef COISAC_AVX2

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  if (!supported) return nullptr;
  static const KernelTable table{"avx2",          dot_avx2,     axpy_avx2,  gemv_avx2,
                                 gemv_t_acc_avx2, ger_acc_avx2, cdotc_avx2, cnorm2_avx2};
  return &table;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace coisac::simd
