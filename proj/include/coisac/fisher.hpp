// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "coisac/channel.hpp"
#include "coisac/scenario.hpp"
#include "coisac/types.hpp"

namespace coisac {

// Echo model of one target seen by N cooperating BSs:
//   y = (A(theta, beta) .* B(alpha)) P s + n
// Block (n, m) of A is a(theta_n, beta_n) a(theta_m, beta_m)^H and block
// (n, m) of B is alpha_{m,n} times the L x L all-ones matrix.
struct SensingOperators {
  int N = 0;
  int L = 0;
  CMat A;        // NL x NL
  CMat B;        // NL x NL
  CMat A_tilde;  // NL x N^3 L; column block (m*N + n) is dA/d alpha_{m,n}
  CMat D_theta;  // NL x N^2 L; column block i is d(A .* B)/d theta_i
  CMat D_beta;   // NL x N^2 L
  std::shared_ptr<const CMat> Pi_perp;  // NL x NL, shared across samples of one geometry
  int nuisance_rank = 0;

  int n_angles() const { return 2 * N; }
  // Angle i in [0, 2N): theta_0..theta_{N-1}, then beta_0..beta_{N-1}.
  auto deriv(int i) const {
    const Eigen::Index nl = static_cast<Eigen::Index>(N) * L;
    return i < N ? D_theta.middleCols(i * nl, nl) : D_beta.middleCols((i - N) * nl, nl);
  }
  CMat D() const;
};

// A .* B for arbitrary angles; used by the derivative checks.
CMat sensing_response(const std::vector<double>& theta, const std::vector<double>& beta,
                      const CMat& alpha, const ScenarioConfig& cfg);

// I - X X^+ with singular values below max(rows, cols) * eps * sigma_max
// treated as zero.
CMat orthogonal_complement_projector(const CMat& X, int* rank = nullptr);

// Pi_perp depends on the target angles only. The cache keys on the exact
// angle values, so every sample that shares a geometry shares one matrix.
class ProjectorCache {
 public:
  explicit ProjectorCache(std::size_t capacity = 256) : capacity_(capacity) {}
  std::shared_ptr<const CMat> get_or_build(const AngleSet& angles, const CMat& A_tilde, int* rank);
  std::size_t size() const;

 private:
  struct Entry {
    std::shared_ptr<const CMat> proj;
    int rank = 0;
  };
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::map<std::vector<double>, Entry> entries_;
};

SensingOperators build_operators(const ChannelSample& sample, const ScenarioConfig& cfg,
                                 int target = 0, ProjectorCache* cache = nullptr);

// J_e = (2 / sigma2) Re sum_c Pbar_c^H D^H Pi D Pbar_c over every column of P,
// symmetrized. 2N x 2N.
RMat efim(const CMat& P, const SensingOperators& ops, double sigma2);

inline constexpr double kSpebJitter = 1e-12;
inline constexpr double kIllConditioned = 1e12;

struct SpebResult {
  double value = 0.0;
  double jitter = 0.0;  // the multiple of I added to J before solving
  bool ill_conditioned = false;
  double condition = 0.0;
  RMat J_e;
  RMat J;
};

// tr(J^-1) with J = Q^T J_e Q, solved against J + kSpebJitter * tr(J) / 3 * I.
// Returns +inf when J is identically zero.
SpebResult speb(const CMat& P, const SensingOperators& ops, const RMat& Q, double sigma2);

// d SPEB / dP in the d/dRe + j d/dIm convention, including the dependence of
// the jitter on tr(J).
CMat speb_gradient(const CMat& P, const SensingOperators& ops, const RMat& Q, double sigma2,
                   SpebResult* value = nullptr);

struct FullFim {
  RMat J_ww;       // 2N x 2N
  RMat J_wa;       // 2N x n_nuisance
  RMat J_aa;       // n_nuisance x n_nuisance
  RMat J_e_schur;  // J_ww - J_wa J_aa^+ J_wa^T
};

// Brute-force FIM over (omega, reflection coefficients) with unit symbol
// covariance. Each stream (column of P) carries its own copy of the
// coefficients, split into real and imaginary parts. Small instances only.
FullFim full_fim_oracle(const ChannelSample& sample, const CMat& P, const ScenarioConfig& cfg,
                        int target = 0);

// Same, with one set of coefficients shared by all streams.
FullFim full_fim_oracle_shared(const ChannelSample& sample, const CMat& P,
                               const ScenarioConfig& cfg, int target = 0);

}  // namespace coisac
