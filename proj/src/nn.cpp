// SPDX-License-Identifier: Apache-2.0
#include "coisac/nn.hpp"

#include <cmath>
#include <numeric>

#include "coisac/simd/kernels.hpp"

namespace coisac::nn {

int ParamSet::add(const std::string& name, std::vector<int> shape) {
  if (index_.count(name)) throw Error("duplicate parameter name " + name);
  const int size = std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<int>());
  Tensor t{name, std::move(shape), RVec::Zero(size), RVec::Zero(size)};
  tensors_.push_back(std::move(t));
  const int id = static_cast<int>(tensors_.size()) - 1;
  index_[name] = id;
  return id;
}

int ParamSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

void ParamSet::zero_grad() {
  for (auto& t : tensors_) t.grad.setZero();
}

Dense Dense::create(ParamSet& ps, const std::string& name, int in, int out) {
  Dense d;
  d.in = in;
  d.out = out;
  d.W = ps.add(name + ".W", {out, in});
  d.b = ps.add(name + ".b", {out});
  return d;
}

void Dense::init(ParamSet& ps, Rng& rng) const {
  const double limit = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index i = 0; i < ps[W].value.size(); ++i) ps[W].value[i] = u(rng);
  ps[b].value.setZero();
}

void Dense::forward(const ParamSet& ps, const double* x, double* y) const {
  simd::kernels().gemv(ps[W].value.data(), x, ps[b].value.data(), y, out, in);
}

void Dense::backward(ParamSet& ps, const double* x, const double* gy, double* gx) const {
  const auto& k = simd::kernels();
  k.ger_acc(gy, x, ps[W].grad.data(), out, in);
  k.axpy(1.0, gy, ps[b].grad.data(), out);
  if (gx) k.gemv_t_acc(ps[W].value.data(), gy, gx, out, in);
}

LayerNorm LayerNorm::create(ParamSet& ps, const std::string& name, int width) {
  LayerNorm ln;
  ln.width = width;
  ln.gamma = ps.add(name + ".gamma", {width});
  ln.beta = ps.add(name + ".beta", {width});
  ps[ln.gamma].value.setOnes();
  return ln;
}

void LayerNorm::forward(const ParamSet& ps, const double* x, double* y, Cache& cache) const {
  double mean = 0.0;
  for (int i = 0; i < width; ++i) mean += x[i];
  mean /= width;
  double var = 0.0;
  for (int i = 0; i < width; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= width;
  cache.inv_std = 1.0 / std::sqrt(var + kEps);
  cache.xhat.resize(width);
  const double* g = ps[gamma].value.data();
  const double* b = ps[beta].value.data();
  for (int i = 0; i < width; ++i) {
    cache.xhat[i] = (x[i] - mean) * cache.inv_std;
    y[i] = g[i] * cache.xhat[i] + b[i];
  }
}

void LayerNorm::backward(ParamSet& ps, const Cache& cache, const double* gy, double* gx) const {
  const double* g = ps[gamma].value.data();
  double* dg = ps[gamma].grad.data();
  double* db = ps[beta].grad.data();
  double sum_d = 0.0, sum_dx = 0.0;
  for (int i = 0; i < width; ++i) {
    dg[i] += gy[i] * cache.xhat[i];
    db[i] += gy[i];
    const double d = gy[i] * g[i];
    sum_d += d;
    sum_dx += d * cache.xhat[i];
  }
  const double inv_w = 1.0 / width;
  for (int i = 0; i < width; ++i) {
    const double d = gy[i] * g[i];
    gx[i] += cache.inv_std * (d - inv_w * sum_d - cache.xhat[i] * inv_w * sum_dx);
  }
}

void AdamW::step(ParamSet& ps) {
  auto& ts = ps.tensors();
  if (m_.size() != ts.size()) {
    m_.clear();
    v_.clear();
    for (const auto& t : ts) {
      m_.push_back(RVec::Zero(t.value.size()));
      v_.push_back(RVec::Zero(t.value.size()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    RVec& w = ts[i].value;
    const RVec& g = ts[i].grad;
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      w[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[j]);
    }
  }
}

}  // namespace coisac::nn
