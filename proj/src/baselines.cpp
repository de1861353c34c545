// SPDX-License-Identifier: Apache-2.0
#include "coisac/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "coisac/rng.hpp"

namespace coisac {

std::string_view baseline_tag(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kHomoGnn: return "homo_gnn";
    case BaselineKind::kNaiveConv: return "naive_conv";
    case BaselineKind::kRandom: return "random";
    case BaselineKind::kReference: return "reference";
  }
  return "?";
}

struct NaiveConvNet::ConvTape : Tape {
  RVec x0;   // input grid
  RVec pre1;  // conv1 pre-activation
  RVec pre2;  // conv2 pre-activation
  RVec pre3;  // fc1 pre-activation
  BeamformingMatrix raw;
};

namespace {

std::size_t conv_params(const ModelConfig& mc) {
  const std::size_t k2 = static_cast<std::size_t>(mc.conv_kernel) * mc.conv_kernel;
  return mc.conv_channels1 * (k2 + 1) + mc.conv_channels2 * (mc.conv_channels1 * k2 + 1);
}

}  // namespace

int naive_conv_hidden_for_budget(const ModelConfig& mc, const ScenarioConfig& cfg,
                                 std::size_t target) {
  const std::size_t cells = static_cast<std::size_t>(cfg.N) * (cfg.K + cfg.Z) * 2 * cfg.L();
  const std::size_t flat = mc.conv_channels2 * cells;
  const std::size_t fixed = conv_params(mc) + cells;
  const double per_unit = static_cast<double>(flat + 1 + cells);
  const double h = (static_cast<double>(target) - static_cast<double>(fixed)) / per_unit;
  return std::max(4, static_cast<int>(std::lround(h)));
}

NaiveConvNet::NaiveConvNet(const ModelConfig& mc, const ScenarioConfig& cfg, std::uint64_t seed)
    : Model(cfg), mc_(mc), graph_(build_graph(cfg.N, cfg.K, cfg.Z)) {
  if (mc_.conv_kernel < 1 || mc_.conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be odd");
  if (mc_.conv_channels1 < 1 || mc_.conv_channels2 < 1) throw ConfigError("conv channels must be >= 1");
  if (mc_.fc_hidden < 1) throw ConfigError("fc_hidden must be >= 1");
  mc_.kind = ModelKind::kNaiveConv;
  rows_ = graph_.n_nodes();
  cols_ = 2 * cfg.L();
  const int k = mc_.conv_kernel;
  auto make_conv = [&](const std::string& name, int in_ch, int out_ch) {
    Conv c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.W = params_.add(name + ".W", {out_ch, in_ch, k, k});
    c.b = params_.add(name + ".b", {out_ch});
    return c;
  };
  conv1_ = make_conv("conv1", 1, mc_.conv_channels1);
  conv2_ = make_conv("conv2", mc_.conv_channels1, mc_.conv_channels2);
  fc1_ = nn::Dense::create(params_, "fc1", mc_.conv_channels2 * rows_ * cols_, mc_.fc_hidden);
  fc2_ = nn::Dense::create(params_, "fc2", mc_.fc_hidden, rows_ * cols_);

  Rng rng = make_rng(seed, Stream::kParamInit, 0);
  for (const Conv* c : {&conv1_, &conv2_}) {
    const double fan_in = c->in_ch * k * k, fan_out = c->out_ch * k * k;
    std::uniform_real_distribution<double> u(-std::sqrt(6.0 / (fan_in + fan_out)),
                                             std::sqrt(6.0 / (fan_in + fan_out)));
    for (Eigen::Index i = 0; i < params_[c->W].value.size(); ++i) params_[c->W].value[i] = u(rng);
  }
  fc1_.init(params_, rng);
  fc2_.init(params_, rng);
}

void NaiveConvNet::conv_forward(const Conv& c, const RVec& in, RVec& out) const {
  const int k = mc_.conv_kernel, pad = k / 2, plane = rows_ * cols_;
  const RVec& W = params_[c.W].value;
  const RVec& b = params_[c.b].value;
  out.resize(static_cast<Eigen::Index>(c.out_ch) * plane);
  for (int o = 0; o < c.out_ch; ++o) {
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        double acc = b[o];
        for (int ch = 0; ch < c.in_ch; ++ch) {
          for (int di = 0; di < k; ++di) {
            const int ii = i + di - pad;
            if (ii < 0 || ii >= rows_) continue;
            for (int dj = 0; dj < k; ++dj) {
              const int jj = j + dj - pad;
              if (jj < 0 || jj >= cols_) continue;
              acc += W[((o * c.in_ch + ch) * k + di) * k + dj] * in[ch * plane + ii * cols_ + jj];
            }
          }
        }
        out[o * plane + i * cols_ + j] = acc;
      }
    }
  }
}

void NaiveConvNet::conv_backward(const Conv& c, const RVec& in, const RVec& g_out, RVec* g_in) {
  const int k = mc_.conv_kernel, pad = k / 2, plane = rows_ * cols_;
  const RVec& W = params_[c.W].value;
  RVec& dW = params_[c.W].grad;
  RVec& db = params_[c.b].grad;
  for (int o = 0; o < c.out_ch; ++o) {
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        const double g = g_out[o * plane + i * cols_ + j];
        if (g == 0.0) continue;
        db[o] += g;
        for (int ch = 0; ch < c.in_ch; ++ch) {
          for (int di = 0; di < k; ++di) {
            const int ii = i + di - pad;
            if (ii < 0 || ii >= rows_) continue;
            for (int dj = 0; dj < k; ++dj) {
              const int jj = j + dj - pad;
              if (jj < 0 || jj >= cols_) continue;
              const int w = ((o * c.in_ch + ch) * k + di) * k + dj;
              const int x = ch * plane + ii * cols_ + jj;
              dW[w] += g * in[x];
              if (g_in) (*g_in)[x] += g * W[w];
            }
          }
        }
      }
    }
  }
}

BeamformingMatrix NaiveConvNet::forward(const ChannelSample& input,
                                        std::unique_ptr<Tape>* tape) const {
  const RowMajorMat X = init_features(input, cfg_, graph_);
  RVec x0 = Eigen::Map<const RVec>(X.data(), X.size());
  RVec pre1, pre2;
  conv_forward(conv1_, x0, pre1);
  const RVec a1 = pre1.unaryExpr([](double v) { return nn::leaky(v); });
  conv_forward(conv2_, a1, pre2);
  const RVec a2 = pre2.unaryExpr([](double v) { return nn::leaky(v); });
  RVec pre3(mc_.fc_hidden);
  fc1_.forward(params_, a2.data(), pre3.data());
  const RVec a3 = pre3.unaryExpr([](double v) { return nn::leaky(v); });
  RowMajorMat raw_nodes(rows_, cols_);
  fc2_.forward(params_, a3.data(), raw_nodes.data());
  BeamformingMatrix raw = assemble_node_outputs(raw_nodes, cfg_, graph_);
  BeamformingMatrix out = normalize_output(raw, cfg_.power_budget);
  if (tape) {
    auto t = std::make_unique<ConvTape>();
    t->x0 = std::move(x0);
    t->pre1 = std::move(pre1);
    t->pre2 = std::move(pre2);
    t->pre3 = std::move(pre3);
    t->raw = std::move(raw);
    *tape = std::move(t);
  }
  return out;
}

void NaiveConvNet::backward(const Tape& tape_base, const CMat& dP) {
  const auto& t = dynamic_cast<const ConvTape&>(tape_base);
  const CMat g_raw = normalize_output_backward(t.raw, cfg_.power_budget, dP);
  const RowMajorMat g_nodes = node_output_gradient(g_raw, cfg_, graph_);
  auto lk = [](double v) { return nn::leaky(v); };
  const RVec a3 = t.pre3.unaryExpr(lk);
  const RVec a2 = t.pre2.unaryExpr(lk);
  const RVec a1 = t.pre1.unaryExpr(lk);

  RVec g3 = RVec::Zero(mc_.fc_hidden);
  fc2_.backward(params_, a3.data(), g_nodes.data(), g3.data());
  for (Eigen::Index i = 0; i < g3.size(); ++i) g3[i] *= nn::leaky_grad(t.pre3[i]);
  RVec g2 = RVec::Zero(a2.size());
  fc1_.backward(params_, a2.data(), g3.data(), g2.data());
  for (Eigen::Index i = 0; i < g2.size(); ++i) g2[i] *= nn::leaky_grad(t.pre2[i]);
  RVec g1 = RVec::Zero(a1.size());
  conv_backward(conv2_, a1, g2, &g1);
  for (Eigen::Index i = 0; i < g1.size(); ++i) g1[i] *= nn::leaky_grad(t.pre1[i]);
  conv_backward(conv1_, t.x0, g1, nullptr);
}

BeamformingMatrix reference_beamformer(const ChannelSample& sample, const ScenarioConfig& cfg,
                                       double sensing_share) {
  if (!(sensing_share >= 0.0 && sensing_share <= 1.0)) {
    throw ConfigError("sensing share must lie in [0, 1]");
  }
  const int L = cfg.L();
  BeamformingMatrix bf = BeamformingMatrix::zeros(cfg.N, L, cfg.K, cfg.Z);
  for (int n = 0; n < cfg.N; ++n) {
    const double pn = cfg.power_budget.at(n);
    const double ps = sensing_share * pn / cfg.Z;
    const double pc = (1.0 - sensing_share) * pn / cfg.K;
    for (int z = 0; z < cfg.Z; ++z) {
      const CVec a = upa_steering(cfg, sample.angles.at(z).theta[n], sample.angles.at(z).beta[n]);
      bf.block(n, bf.sensing_col(z)) = std::sqrt(ps) * a;
    }
    for (int k = 0; k < cfg.K; ++k) {
      const CVec h = sample.H.block(n * L, k, L, 1);
      const double norm = h.norm();
      if (norm > 0.0) bf.block(n, bf.comm_col(k)) = (std::sqrt(pc) / norm) * h;
    }
  }
  return bf;
}

BeamformingMatrix random_beamformer(std::uint64_t seed, const ScenarioConfig& cfg) {
  const int L = cfg.L();
  BeamformingMatrix bf = BeamformingMatrix::zeros(cfg.N, L, cfg.K, cfg.Z);
  Rng rng = make_rng(seed, Stream::kRandomBeam, 0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index c = 0; c < bf.P.cols(); ++c) {
    for (Eigen::Index r = 0; r < bf.P.rows(); ++r) {
      const double re = g(rng);
      const double im = g(rng);
      bf.P(r, c) = cplx(re, im);
    }
  }
  for (int n = 0; n < cfg.N; ++n) {
    auto rows = bf.P.middleRows(static_cast<Eigen::Index>(n) * L, L);
    rows *= std::sqrt(cfg.power_budget.at(n)) / rows.norm();
  }
  return bf;
}

}  // namespace coisac
