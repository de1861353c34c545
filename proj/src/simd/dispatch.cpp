// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string_view>

#include "coisac/simd/kernels.hpp"

namespace coisac::simd {
namespace {

const KernelTable* initial_table() {
  const char* env = std::getenv("COISAC_SIMD");
  if (env && std::string_view(env) == "scalar") return &scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

bool select_backend(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      active().store(&scalar_kernels());
      return true;
    case Backend::kAvx2:
      if (const KernelTable* t = avx2_kernels()) {
        active().store(t);
        return true;
      }
      return false;
  }
  return false;
}

Backend active_backend() {
  return &kernels() == &scalar_kernels() ? Backend::kScalar : Backend::kAvx2;
}

}  // namespace coisac::simd
