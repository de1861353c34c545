// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "coisac/rng.hpp"
#include "coisac/types.hpp"

namespace coisac::nn {

struct Tensor {
  std::string name;
  std::vector<int> shape;
  RVec value;
  RVec grad;
};

// Named, ordered collection of trainable tensors with matching gradients.
class ParamSet {
 public:
  int add(const std::string& name, std::vector<int> shape);
  Tensor& operator[](int id) { return tensors_[id]; }
  const Tensor& operator[](int id) const { return tensors_[id]; }
  int find(const std::string& name) const;  // -1 when absent
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, int> index_;
};

inline double leaky(double x) { return x > 0.0 ? x : 0.01 * x; }
inline double leaky_grad(double x) { return x > 0.0 ? 1.0 : 0.01; }

// y = W x + b with W stored row-major as out x in.
struct Dense {
  int W = -1;
  int b = -1;
  int in = 0;
  int out = 0;

  static Dense create(ParamSet& ps, const std::string& name, int in, int out);
  // Glorot-uniform weights, zero bias.
  void init(ParamSet& ps, Rng& rng) const;
  void forward(const ParamSet& ps, const double* x, double* y) const;
  // Accumulates dW, db; adds W^T gy into gx when gx != nullptr.
  void backward(ParamSet& ps, const double* x, const double* gy, double* gx) const;
};

// Per-vector standardization with learnable scale and shift.
struct LayerNorm {
  int gamma = -1;
  int beta = -1;
  int width = 0;
  static constexpr double kEps = 1e-5;

  struct Cache {
    RVec xhat;
    double inv_std = 0.0;
  };

  static LayerNorm create(ParamSet& ps, const std::string& name, int width);
  void forward(const ParamSet& ps, const double* x, double* y, Cache& cache) const;
  // Accumulates dgamma, dbeta; adds the input gradient into gx.
  void backward(ParamSet& ps, const Cache& cache, const double* gy, double* gx) const;
};

// Adam with decoupled weight decay.
class AdamW {
 public:
  double lr = 2e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  struct State {
    std::int64_t t = 0;
    std::vector<RVec> m;
    std::vector<RVec> v;
  };

  void step(ParamSet& ps);
  std::int64_t steps() const { return t_; }
  State state() const { return {t_, m_, v_}; }
  void set_state(State s) {
    t_ = s.t;
    m_ = std::move(s.m);
    v_ = std::move(s.v);
  }
  void reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
  }

 private:
  std::int64_t t_ = 0;
  std::vector<RVec> m_;
  std::vector<RVec> v_;
};

}  // namespace coisac::nn
