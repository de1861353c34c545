// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "coisac/types.hpp"

namespace coisac {

// Stacked per-BS beams. Columns are [p^s_1 .. p^s_Z | p^c_1 .. p^c_K];
// rows n*L .. n*L+L-1 hold BS n's antenna weights.
struct BeamformingMatrix {
  CMat P;
  int N = 0;
  int L = 0;
  int K = 0;
  int Z = 0;

  static BeamformingMatrix zeros(int N, int L, int K, int Z);

  int sensing_col(int z) const { return z; }
  int comm_col(int k) const { return Z + k; }
  int cols() const { return K + Z; }

  auto block(int n, int col) { return P.block(n * L, col, L, 1); }
  auto block(int n, int col) const { return P.block(n * L, col, L, 1); }

  // Throws DimensionError when P does not match (N*L) x (K+Z).
  void check() const;
};

// User indices k are zero-based.
double sinr(const CMat& H, const BeamformingMatrix& bf, int k, double sigma2);
double rate(const CMat& H, const BeamformingMatrix& bf, int k, double sigma2);
std::vector<double> rates(const CMat& H, const BeamformingMatrix& bf, double sigma2);
double sum_rate(const CMat& H, const BeamformingMatrix& bf, double sigma2);

RVec per_bs_power(const BeamformingMatrix& bf);

// Gradient of sum_k w_k * R_k with respect to P, using the convention
// G = d/dRe(P) + j d/dIm(P), so that a first-order change is Re(sum conj(G) dP).
CMat weighted_rate_gradient(const CMat& H, const BeamformingMatrix& bf, double sigma2,
                            const std::vector<double>& weights);

}  // namespace coisac
