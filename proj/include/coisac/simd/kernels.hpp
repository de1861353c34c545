// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <string_view>

namespace coisac::simd {

// Dense inner loops used by the network layers and the communication
// metrics. Matrices are row-major; `W` has `rows` rows of `cols` doubles.
struct KernelTable {
  std::string_view name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y = W x (+ b when b != nullptr)
  void (*gemv)(const double* W, const double* x, const double* b, double* y, std::size_t rows,
               std::size_t cols);
  // dx += W^T g
  void (*gemv_t_acc)(const double* W, const double* g, double* dx, std::size_t rows,
                     std::size_t cols);
  // dW += g x^T
  void (*ger_acc)(const double* g, const double* x, double* dW, std::size_t rows,
                  std::size_t cols);
  // sum_i conj(x_i) * y_i
  std::complex<double> (*cdotc)(const std::complex<double>* x, const std::complex<double>* y,
                                std::size_t n);
  // sum_i |x_i|^2
  double (*cnorm2)(const std::complex<double>* x, std::size_t n);
};

enum class Backend { kScalar, kAvx2 };

const KernelTable& scalar_kernels();
// nullptr when the running CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// Active table. Selected on first use: AVX2 when supported unless the
// environment variable COISAC_SIMD=scalar is set.
const KernelTable& kernels();

// Force a backend (tests, benchmarks). Returns false if unavailable.
bool select_backend(Backend backend);
Backend active_backend();

}  // namespace coisac::simd
