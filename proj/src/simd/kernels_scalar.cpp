// SPDX-License-Identifier: Apache-2.0
#include "coisac/simd/kernels.hpp"

namespace coisac::simd {
namespace {

double dot_ref(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_ref(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemv_ref(const double* W, const double* x, const double* b, double* y, std::size_t rows,
              std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot_ref(W + r * cols, x, cols) + (b ? b[r] : 0.0);
  }
}

void gemv_t_acc_ref(const double* W, const double* g, double* dx, std::size_t rows,
                    std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_ref(g[r], W + r * cols, dx, cols);
}

void ger_acc_ref(const double* g, const double* x, double* dW, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_ref(g[r], x, dW + r * cols, cols);
}

std::complex<double> cdotc_ref(const std::complex<double>* x, const std::complex<double>* y,
                               std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    re += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
    im += x[i].real() * y[i].imag() - x[i].imag() * y[i].real();
  }
  return {re, im};
}

double cnorm2_ref(const std::complex<double>* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return s;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", dot_ref,    axpy_ref,  gemv_ref, gemv_t_acc_ref,
                                 ger_acc_ref, cdotc_ref, cnorm2_ref};
  return table;
}

}  // namespace coisac::simd
