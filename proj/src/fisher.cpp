// SPDX-License-Identifier: Apache-2.0
#include "coisac/fisher.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace coisac {

namespace {

std::vector<SteeringDerivatives> steering_set(const AngleSet& ang, const ScenarioConfig& cfg) {
  std::vector<SteeringDerivatives> out;
  out.reserve(ang.theta.size());
  for (std::size_t n = 0; n < ang.theta.size(); ++n) {
    out.push_back(upa_steering_derivatives(ang.theta[n], ang.beta[n], cfg.Lx, cfg.Lz,
                                           cfg.d_spacing, cfg.wavelength));
  }
  return out;
}

void check_alpha(const CMat& alpha, int N) {
  if (alpha.rows() != N || alpha.cols() != N) {
    throw DimensionError("reflection coefficients must be " + std::to_string(N) + "x" +
                         std::to_string(N));
  }
}

void check_P(const CMat& P, const SensingOperators& ops) {
  if (P.rows() != static_cast<Eigen::Index>(ops.N) * ops.L || P.cols() < 1) {
    throw DimensionError("P has " + std::to_string(P.rows()) + " rows, sensing operators expect " +
                         std::to_string(ops.N * ops.L));
  }
}

// Column i: Pi * D_i * p
CMat projected_derivatives(const SensingOperators& ops, const Eigen::Ref<const CVec>& p) {
  const Eigen::Index nl = static_cast<Eigen::Index>(ops.N) * ops.L;
  CMat W(nl, ops.n_angles());
  for (int i = 0; i < ops.n_angles(); ++i) W.col(i).noalias() = ops.deriv(i) * p;
  return (*ops.Pi_perp) * W;
}

RMat pinv_symmetric(const RMat& M) {
  Eigen::SelfAdjointEigenSolver<RMat> es(M);
  const RVec& ev = es.eigenvalues();
  const double lmax = ev.cwiseAbs().maxCoeff();
  const double tol = static_cast<double>(M.rows()) * std::numeric_limits<double>::epsilon() * lmax;
  RVec inv = RVec::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > tol) inv[i] = 1.0 / ev[i];
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

FullFim assemble(const CMat& Mw, const CMat& Ma, double sigma2) {
  const double s = 2.0 / sigma2;
  FullFim f;
  f.J_ww = s * (Mw.adjoint() * Mw).real();
  f.J_wa = s * (Mw.adjoint() * Ma).real();
  f.J_aa = s * (Ma.adjoint() * Ma).real();
  f.J_ww = 0.5 * (f.J_ww + f.J_ww.transpose()).eval();
  f.J_aa = 0.5 * (f.J_aa + f.J_aa.transpose()).eval();
  f.J_e_schur = f.J_ww - f.J_wa * pinv_symmetric(f.J_aa) * f.J_wa.transpose();
  f.J_e_schur = 0.5 * (f.J_e_schur + f.J_e_schur.transpose()).eval();
  return f;
}

}  // namespace

CMat SensingOperators::D() const {
  CMat d(D_theta.rows(), D_theta.cols() + D_beta.cols());
  d << D_theta, D_beta;
  return d;
}

CMat sensing_response(const std::vector<double>& theta, const std::vector<double>& beta,
                      const CMat& alpha, const ScenarioConfig& cfg) {
  const int N = static_cast<int>(theta.size());
  const int L = cfg.L();
  check_alpha(alpha, N);
  std::vector<CVec> a;
  for (int n = 0; n < N; ++n) a.push_back(upa_steering(cfg, theta[n], beta[n]));
  CMat R(N * L, N * L);
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < N; ++m) {
      R.block(n * L, m * L, L, L) = alpha(m, n) * (a[n] * a[m].adjoint());
    }
  }
  return R;
}

CMat orthogonal_complement_projector(const CMat& X, int* rank) {
  Eigen::BDCSVD<CMat> svd(X, Eigen::ComputeThinU);
  const RVec& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const double tol = static_cast<double>(std::max(X.rows(), X.cols())) *
                     std::numeric_limits<double>::epsilon() * smax;
  int r = 0;
  while (r < sv.size() && sv[r] > tol) ++r;
  if (rank) *rank = r;
  const auto U = svd.matrixU().leftCols(r);
  CMat proj = CMat::Identity(X.rows(), X.rows()) - U * U.adjoint();
  return 0.5 * (proj + proj.adjoint());
}

std::shared_ptr<const CMat> ProjectorCache::get_or_build(const AngleSet& angles,
                                                        const CMat& A_tilde, int* rank) {
  std::vector<double> key = angles.theta;
  key.insert(key.end(), angles.beta.begin(), angles.beta.end());
  key.push_back(static_cast<double>(A_tilde.rows()));
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      if (rank) *rank = it->second.rank;
      return it->second.proj;
    }
  }
  Entry e;
  e.proj = std::make_shared<const CMat>(orthogonal_complement_projector(A_tilde, &e.rank));
  if (rank) *rank = e.rank;
  std::lock_guard<std::mutex> lock(mu_);
  if (entries_.size() >= capacity_) entries_.clear();
  entries_.emplace(std::move(key), e);
  return e.proj;
}

std::size_t ProjectorCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

SensingOperators build_operators(const ChannelSample& sample, const ScenarioConfig& cfg,
                                 int target, ProjectorCache* cache) {
  if (target < 0 || target >= static_cast<int>(sample.angles.size()) ||
      target >= static_cast<int>(sample.alphas.size())) {
    throw DimensionError("target index " + std::to_string(target) + " out of range");
  }
  const AngleSet& ang = sample.angles[target];
  const CMat& alpha = sample.alphas[target];
  const int N = cfg.N;
  const int L = cfg.L();
  const Eigen::Index nl = static_cast<Eigen::Index>(N) * L;
  if (static_cast<int>(ang.theta.size()) != N) throw DimensionError("angle set does not match N");
  check_alpha(alpha, N);

  const auto sv = steering_set(ang, cfg);
  SensingOperators ops;
  ops.N = N;
  ops.L = L;
  ops.A.resize(nl, nl);
  ops.B.resize(nl, nl);
  ops.A_tilde = CMat::Zero(nl, nl * N * N);
  ops.D_theta = CMat::Zero(nl, nl * N);
  ops.D_beta = CMat::Zero(nl, nl * N);
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < N; ++m) {
      const CMat a_nm = sv[n].a * sv[m].a.adjoint();
      ops.A.block(n * L, m * L, L, L) = a_nm;
      ops.B.block(n * L, m * L, L, L).setConstant(alpha(m, n));
      ops.A_tilde.block(n * L, (m * N + n) * nl + m * L, L, L) = a_nm;
    }
  }
  for (int i = 0; i < N; ++i) {
    auto Dt = ops.D_theta.middleCols(i * nl, nl);
    auto Db = ops.D_beta.middleCols(i * nl, nl);
    for (int m = 0; m < N; ++m) {
      // row block i: receive-side derivative; column block i: transmit side
      Dt.block(i * L, m * L, L, L) += alpha(m, i) * (sv[i].da_dtheta * sv[m].a.adjoint());
      Db.block(i * L, m * L, L, L) += alpha(m, i) * (sv[i].da_dbeta * sv[m].a.adjoint());
      Dt.block(m * L, i * L, L, L) += alpha(i, m) * (sv[m].a * sv[i].da_dtheta.adjoint());
      Db.block(m * L, i * L, L, L) += alpha(i, m) * (sv[m].a * sv[i].da_dbeta.adjoint());
    }
  }
  if (cache) {
    ops.Pi_perp = cache->get_or_build(ang, ops.A_tilde, &ops.nuisance_rank);
  } else {
    ops.Pi_perp =
        std::make_shared<const CMat>(orthogonal_complement_projector(ops.A_tilde, &ops.nuisance_rank));
  }
  return ops;
}

RMat efim(const CMat& P, const SensingOperators& ops, double sigma2) {
  check_P(P, ops);
  RMat J = RMat::Zero(ops.n_angles(), ops.n_angles());
  for (Eigen::Index c = 0; c < P.cols(); ++c) {
    const CMat V = projected_derivatives(ops, P.col(c));
    J.noalias() += (V.adjoint() * V).real();
  }
  J *= 2.0 / sigma2;
  return 0.5 * (J + J.transpose());
}

SpebResult speb(const CMat& P, const SensingOperators& ops, const RMat& Q, double sigma2) {
  if (Q.rows() != ops.n_angles() || Q.cols() != 3) {
    throw DimensionError("position Jacobian must be " + std::to_string(ops.n_angles()) + "x3");
  }
  SpebResult r;
  r.J_e = efim(P, ops, sigma2);
  r.J = Q.transpose() * r.J_e * Q;
  r.J = 0.5 * (r.J + r.J.transpose()).eval();
  const double tr = r.J.trace();
  if (!(tr > 0.0) || !std::isfinite(tr)) {
    r.value = std::numeric_limits<double>::infinity();
    r.ill_conditioned = true;
    r.condition = std::numeric_limits<double>::infinity();
    return r;
  }
  r.jitter = kSpebJitter * tr / 3.0;
  const RMat Jr = r.J + r.jitter * RMat::Identity(3, 3);
  const Eigen::LDLT<RMat> ldlt(Jr);
  double value = 0.0;
  for (int i = 0; i < 3; ++i) value += ldlt.solve(RVec::Unit(3, i))[i];
  r.value = value;
  Eigen::SelfAdjointEigenSolver<RMat> es(Jr, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()[0];
  r.condition = lmin > 0.0 ? es.eigenvalues()[2] / lmin : std::numeric_limits<double>::infinity();
  r.ill_conditioned = r.condition > kIllConditioned;
  return r;
}

CMat speb_gradient(const CMat& P, const SensingOperators& ops, const RMat& Q, double sigma2,
                   SpebResult* value) {
  SpebResult r = speb(P, ops, Q, sigma2);
  CMat G = CMat::Zero(P.rows(), P.cols());
  if (std::isfinite(r.value)) {
    const RMat Jr = r.J + r.jitter * RMat::Identity(3, 3);
    const RMat inv = Jr.ldlt().solve(RMat::Identity(3, 3));
    const RMat G_reg = -inv * inv;
    const RMat G_J = G_reg + (kSpebJitter / 3.0) * G_reg.trace() * RMat::Identity(3, 3);
    RMat G_e = Q * G_J * Q.transpose();
    G_e = 0.5 * (G_e + G_e.transpose()).eval();
    const CMat G_ec = G_e.cast<cplx>();
    for (Eigen::Index c = 0; c < P.cols(); ++c) {
      const CMat V = projected_derivatives(ops, P.col(c));
      const CMat Y = (*ops.Pi_perp) * (V * G_ec);
      CVec g = CVec::Zero(P.rows());
      for (int i = 0; i < ops.n_angles(); ++i) g.noalias() += ops.deriv(i).adjoint() * Y.col(i);
      G.col(c) = (4.0 / sigma2) * g;
    }
  }
  if (value) *value = std::move(r);
  return G;
}

FullFim full_fim_oracle(const ChannelSample& sample, const CMat& P, const ScenarioConfig& cfg,
                        int target) {
  const SensingOperators ops = build_operators(sample, cfg, target);
  check_P(P, ops);
  const int N = ops.N;
  const Eigen::Index nl = static_cast<Eigen::Index>(N) * ops.L;
  const Eigen::Index C = P.cols();
  const int n_alpha = N * N;
  CMat Mw = CMat::Zero(C * nl, ops.n_angles());
  CMat Ma = CMat::Zero(C * nl, 2 * n_alpha * C);
  const cplx j(0.0, 1.0);
  for (Eigen::Index c = 0; c < C; ++c) {
    for (int i = 0; i < ops.n_angles(); ++i) Mw.block(c * nl, i, nl, 1) = ops.deriv(i) * P.col(c);
    for (int q = 0; q < n_alpha; ++q) {
      const CVec du = ops.A_tilde.middleCols(q * nl, nl) * P.col(c);
      const Eigen::Index col = 2 * (c * n_alpha + q);
      Ma.block(c * nl, col, nl, 1) = du;
      Ma.block(c * nl, col + 1, nl, 1) = j * du;
    }
  }
  return assemble(Mw, Ma, cfg.noise_power);
}

FullFim full_fim_oracle_shared(const ChannelSample& sample, const CMat& P,
                               const ScenarioConfig& cfg, int target) {
  const SensingOperators ops = build_operators(sample, cfg, target);
  check_P(P, ops);
  const int N = ops.N;
  const Eigen::Index nl = static_cast<Eigen::Index>(N) * ops.L;
  const Eigen::Index C = P.cols();
  const int n_alpha = N * N;
  CMat Mw = CMat::Zero(C * nl, ops.n_angles());
  CMat Ma = CMat::Zero(C * nl, 2 * n_alpha);
  const cplx j(0.0, 1.0);
  for (Eigen::Index c = 0; c < C; ++c) {
    for (int i = 0; i < ops.n_angles(); ++i) Mw.block(c * nl, i, nl, 1) = ops.deriv(i) * P.col(c);
    for (int q = 0; q < n_alpha; ++q) {
      const CVec du = ops.A_tilde.middleCols(q * nl, nl) * P.col(c);
      Ma.block(c * nl, 2 * q, nl, 1) = du;
      Ma.block(c * nl, 2 * q + 1, nl, 1) = j * du;
    }
  }
  return assemble(Mw, Ma, cfg.noise_power);
}

}  // namespace coisac
