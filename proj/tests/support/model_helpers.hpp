// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include "coisac/model.hpp"

namespace coisac::testing {

// Overwrites every parameter (including normalization scale/shift and
// biases) with N(0, scale^2) draws.
inline void scramble_params(Model& m, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  for (auto& t : m.params().tensors())
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value[i] = g(rng);
}

// Re <C, P>: its gradient in the d/dRe + j d/dIm convention is C itself.
inline double linear_probe(const CMat& C, const CMat& P) {
  return (C.conjugate().cwiseProduct(P)).sum().real();
}

struct GradCheck {
  double max_rel = 0.0;
  int checked = 0;
};

// Central differences with h = 1e-5 carry ~1e-11 absolute rounding noise on
// O(1) outputs, so entries below this magnitude are compared absolutely.
inline constexpr double kFdFloor = 1e-4;

// Compares params().grad after backward(C) with central differences on
// `count` scalars picked across all tensors.
inline GradCheck check_model_gradient(Model& m, const ChannelSample& s, const CMat& C, int count,
                                      std::uint64_t seed) {
  m.params().zero_grad();
  std::unique_ptr<Tape> tape;
  m.forward(s, &tape);
  m.backward(*tape, C);
  std::mt19937_64 rng(seed);
  auto& ts = m.params().tensors();
  GradCheck out;
  for (int c = 0; c < count; ++c) {
    auto& t = ts[std::uniform_int_distribution<std::size_t>(0, ts.size() - 1)(rng)];
    const Eigen::Index i =
        std::uniform_int_distribution<Eigen::Index>(0, t.value.size() - 1)(rng);
    const double w = t.value[i], h = 1e-5 * std::max(1.0, std::abs(w));
    t.value[i] = w + h;
    const double fp = linear_probe(C, m.forward(s).P);
    t.value[i] = w - h;
    const double fm = linear_probe(C, m.forward(s).P);
    t.value[i] = w;
    const double fd = (fp - fm) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(t.grad[i]), kFdFloor});
    out.max_rel = std::max(out.max_rel, std::abs(fd - t.grad[i]) / scale);
    ++out.checked;
  }
  return out;
}

}  // namespace coisac::testing
