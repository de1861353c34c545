// SPDX-License-Identifier: Apache-2.0
#include "coisac/commetrics.hpp"

#include <cmath>
#include <string>

#include "coisac/simd/kernels.hpp"

namespace coisac {

namespace {

// z(k, c) = h_k^H p_c
CMat user_gains(const CMat& H, const BeamformingMatrix& bf) {
  const auto& kern = simd::kernels();
  const Eigen::Index rows = H.rows();
  CMat z(H.cols(), bf.P.cols());
  for (Eigen::Index c = 0; c < bf.P.cols(); ++c) {
    for (Eigen::Index k = 0; k < H.cols(); ++k) {
      z(k, c) = kern.cdotc(H.col(k).data(), bf.P.col(c).data(), static_cast<std::size_t>(rows));
    }
  }
  return z;
}

void check_inputs(const CMat& H, const BeamformingMatrix& bf) {
  bf.check();
  if (H.rows() != bf.P.rows() || H.cols() != bf.K) {
    throw DimensionError("H is " + std::to_string(H.rows()) + "x" + std::to_string(H.cols()) +
                         ", expected " + std::to_string(bf.P.rows()) + "x" +
                         std::to_string(bf.K));
  }
}

double sinr_from_gains(const CMat& z, const BeamformingMatrix& bf, int k, double sigma2) {
  const double signal = std::norm(z(k, bf.comm_col(k)));
  double total = 0.0;
  for (Eigen::Index c = 0; c < z.cols(); ++c) total += std::norm(z(k, c));
  return signal / (total - signal + sigma2);
}

}  // namespace

BeamformingMatrix BeamformingMatrix::zeros(int N, int L, int K, int Z) {
  BeamformingMatrix bf;
  bf.N = N;
  bf.L = L;
  bf.K = K;
  bf.Z = Z;
  bf.P = CMat::Zero(static_cast<Eigen::Index>(N) * L, K + Z);
  return bf;
}

void BeamformingMatrix::check() const {
  if (N < 1 || L < 1 || K < 0 || Z < 0 || P.rows() != static_cast<Eigen::Index>(N) * L ||
      P.cols() != K + Z) {
    throw DimensionError("beamforming matrix is " + std::to_string(P.rows()) + "x" +
                         std::to_string(P.cols()) + ", layout says " + std::to_string(N * L) +
                         "x" + std::to_string(K + Z));
  }
}

double sinr(const CMat& H, const BeamformingMatrix& bf, int k, double sigma2) {
  check_inputs(H, bf);
  if (k < 0 || k >= bf.K) throw DimensionError("user index " + std::to_string(k) + " out of range");
  return sinr_from_gains(user_gains(H, bf), bf, k, sigma2);
}

double rate(const CMat& H, const BeamformingMatrix& bf, int k, double sigma2) {
  return std::log2(1.0 + sinr(H, bf, k, sigma2));
}

std::vector<double> rates(const CMat& H, const BeamformingMatrix& bf, double sigma2) {
  check_inputs(H, bf);
  const CMat z = user_gains(H, bf);
  std::vector<double> r(bf.K);
  for (int k = 0; k < bf.K; ++k) r[k] = std::log2(1.0 + sinr_from_gains(z, bf, k, sigma2));
  return r;
}

double sum_rate(const CMat& H, const BeamformingMatrix& bf, double sigma2) {
  double s = 0.0;
  for (double r : rates(H, bf, sigma2)) s += r;
  return s;
}

RVec per_bs_power(const BeamformingMatrix& bf) {
  bf.check();
  const auto& kern = simd::kernels();
  RVec p = RVec::Zero(bf.N);
  for (int c = 0; c < bf.cols(); ++c) {
    for (int n = 0; n < bf.N; ++n) {
      p[n] += kern.cnorm2(bf.P.col(c).data() + static_cast<Eigen::Index>(n) * bf.L,
                          static_cast<std::size_t>(bf.L));
    }
  }
  return p;
}

CMat weighted_rate_gradient(const CMat& H, const BeamformingMatrix& bf, double sigma2,
                            const std::vector<double>& weights) {
  check_inputs(H, bf);
  if (static_cast<int>(weights.size()) != bf.K) throw DimensionError("one weight per user expected");
  const CMat z = user_gains(H, bf);
  CMat G = CMat::Zero(bf.P.rows(), bf.P.cols());
  const double inv_ln2 = 1.0 / std::log(2.0);
  for (int k = 0; k < bf.K; ++k) {
    if (weights[k] == 0.0) continue;
    double total = sigma2;
    for (Eigen::Index c = 0; c < z.cols(); ++c) total += std::norm(z(k, c));
    const double interference = total - std::norm(z(k, bf.comm_col(k)));
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      double coef = 2.0 / total;
      if (c != bf.comm_col(k)) coef -= 2.0 / interference;
      G.col(c) += (weights[k] * inv_ln2 * coef * z(k, c)) * H.col(k);
    }
  }
  return G;
}

}  // namespace coisac
