// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include "coisac/channel.hpp"
#include "coisac/commetrics.hpp"
#include "coisac/scenario.hpp"

namespace coisac::testing {

// N BSs on a ring around the target at mixed heights, K users, one target.
inline ScenarioConfig small_config(int N, int K, int Lx, int Lz, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScenarioConfig c;
  c.N = N;
  c.K = K;
  c.Z = 1;
  c.Lx = Lx;
  c.Lz = Lz;
  c.wavelength = 0.0107;
  c.d_spacing = c.wavelength / 2;
  c.target_positions = {Vec3(20.0, 30.0, 12.0)};
  for (int n = 0; n < N; ++n) {
    const double ang = 2.0 * kPi * n / N + 0.3 * u(rng);
    c.bs_positions.push_back(Vec3(20.0 + 40.0 * std::cos(ang), 30.0 + 40.0 * std::sin(ang),
                                  5.0 + 2.0 * u(rng)));
  }
  c.user_region.min = Vec3(0.0, 0.0, 1.5);
  c.user_region.max = Vec3(40.0, 60.0, 1.5);
  c.power_budget.assign(N, 0.1);
  c.noise_power = 1.0;
  c.rcs_scale = 1e3;
  c.validate();
  return c;
}

inline CMat random_cmat(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                        double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  CMat M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = g(rng);
      const double im = g(rng);
      M(i, j) = cplx(re, im);
    }
  }
  return M;
}

inline BeamformingMatrix random_beams(const ScenarioConfig& cfg, std::mt19937_64& rng,
                                      double scale = 0.1) {
  BeamformingMatrix bf = BeamformingMatrix::zeros(cfg.N, cfg.L(), cfg.K, cfg.Z);
  bf.P = random_cmat(bf.P.rows(), bf.P.cols(), rng, scale);
  return bf;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

template <typename M>
double rel_fro(const M& a, const M& b) {
  const double den = std::max(a.norm(), b.norm());
  return den == 0.0 ? 0.0 : (a - b).norm() / den;
}

}  // namespace coisac::testing
