// SPDX-License-Identifier: Apache-2.0
#include "coisac/model.hpp"

#include <cmath>
#include <string>

#include "coisac/baselines.hpp"
#include "coisac/lhgnn.hpp"

namespace coisac {

std::string_view model_tag(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLhgnn: return "lhgnn";
    case ModelKind::kLhgnnNoAttention: return "lhgnn_no_attention";
    case ModelKind::kHomoGnn: return "homo_gnn";
    case ModelKind::kNaiveConv: return "naive_conv";
  }
  return "?";
}

ModelKind parse_model_tag(std::string_view tag) {
  for (ModelKind k : {ModelKind::kLhgnn, ModelKind::kLhgnnNoAttention, ModelKind::kHomoGnn,
                      ModelKind::kNaiveConv}) {
    if (model_tag(k) == tag) return k;
  }
  throw ConfigError("unknown model '" + std::string(tag) + "'");
}

std::vector<int> paper_widths(int L) { return {2 * L, 128, 128, 128, 256, 512, 256, 128, 2 * L}; }
std::vector<int> smoke_widths(int L) { return {2 * L, 32, 32, 32}; }

void Model::set_power_budget(const std::vector<double>& watts) {
  if (static_cast<int>(watts.size()) != cfg_.N) throw DimensionError("one budget per BS expected");
  cfg_.power_budget = watts;
}

std::unique_ptr<Model> make_model(const ModelConfig& mc, const ScenarioConfig& cfg,
                                  std::uint64_t seed) {
  cfg.validate();
  switch (mc.kind) {
    case ModelKind::kLhgnn:
    case ModelKind::kLhgnnNoAttention:
      return std::make_unique<GraphNet>(mc, cfg, hetero_topology(build_graph(cfg.N, cfg.K, cfg.Z)),
                                        seed);
    case ModelKind::kHomoGnn:
      return std::make_unique<GraphNet>(mc, cfg, homo_topology(build_graph(cfg.N, cfg.K, cfg.Z)),
                                        seed);
    case ModelKind::kNaiveConv: {
      ModelConfig nc = mc;
      if (nc.fc_hidden <= 0) {
        ModelConfig ref = mc;
        ref.kind = ModelKind::kLhgnn;
        const GraphNet budget(ref, cfg, hetero_topology(build_graph(cfg.N, cfg.K, cfg.Z)), seed);
        nc.fc_hidden = naive_conv_hidden_for_budget(nc, cfg, budget.params().scalar_count());
      }
      return std::make_unique<NaiveConvNet>(nc, cfg, seed);
    }
  }
  throw ConfigError("unsupported model kind");
}

RowMajorMat init_features(const ChannelSample& sample, const ScenarioConfig& cfg,
                          const HeteroGraph& g) {
  const int L = cfg.L();
  if (sample.H.rows() != cfg.NL() || sample.H.cols() != cfg.K ||
      static_cast<int>(sample.angles.size()) != cfg.Z || g.N != cfg.N || g.K != cfg.K ||
      g.Z != cfg.Z) {
    throw DimensionError("sample dimensions do not match the scenario");
  }
  RowMajorMat X(g.n_nodes(), 2 * L);
  for (int n = 0; n < cfg.N; ++n) {
    for (int k = 0; k < cfg.K; ++k) {
      const int v = g.comm_node(n, k);
      for (int l = 0; l < L; ++l) {
        const cplx h = sample.H(n * L + l, k);
        X(v, l) = h.real();
        X(v, L + l) = h.imag();
      }
    }
    for (int z = 0; z < cfg.Z; ++z) {
      const int v = g.sense_node(n, z);
      const CVec a = upa_steering(cfg, sample.angles[z].theta[n], sample.angles[z].beta[n]);
      for (int l = 0; l < L; ++l) {
        X(v, l) = a[l].real();
        X(v, L + l) = a[l].imag();
      }
    }
  }
  return X;
}

BeamformingMatrix assemble_node_outputs(const RowMajorMat& raw, const ScenarioConfig& cfg,
                                        const HeteroGraph& g) {
  const int L = cfg.L();
  if (raw.rows() != g.n_nodes() || raw.cols() != 2 * L) {
    throw DimensionError("raw node outputs must be nodes x 2L");
  }
  BeamformingMatrix bf = BeamformingMatrix::zeros(cfg.N, L, cfg.K, cfg.Z);
  for (int v = 0; v < g.n_nodes(); ++v) {
    const NodeRef ref = g.locate(v);
    const int col = ref.type == NodeType::kComm ? bf.comm_col(ref.index) : bf.sensing_col(ref.index);
    for (int l = 0; l < L; ++l) bf.P(ref.bs * L + l, col) = cplx(raw(v, l), raw(v, L + l));
  }
  return bf;
}

RowMajorMat node_output_gradient(const CMat& dP, const ScenarioConfig& cfg, const HeteroGraph& g) {
  const int L = cfg.L();
  RowMajorMat out(g.n_nodes(), 2 * L);
  for (int v = 0; v < g.n_nodes(); ++v) {
    const NodeRef ref = g.locate(v);
    const int col = ref.type == NodeType::kComm ? cfg.Z + ref.index : ref.index;
    for (int l = 0; l < L; ++l) {
      const cplx d = dP(ref.bs * L + l, col);
      out(v, l) = d.real();
      out(v, L + l) = d.imag();
    }
  }
  return out;
}

namespace {

RVec raw_power(const BeamformingMatrix& raw) { return per_bs_power(raw); }

void check_budget(const BeamformingMatrix& raw, const std::vector<double>& budget) {
  if (static_cast<int>(budget.size()) != raw.N) throw DimensionError("one budget per BS expected");
}

}  // namespace

BeamformingMatrix normalize_output(const BeamformingMatrix& raw, const std::vector<double>& budget) {
  check_budget(raw, budget);
  const RVec p_hat = raw_power(raw);
  BeamformingMatrix out = raw;
  for (int n = 0; n < raw.N; ++n) {
    if (p_hat[n] <= budget[n]) continue;
    const double s = std::sqrt(budget[n]) / std::sqrt(p_hat[n]);
    out.P.middleRows(static_cast<Eigen::Index>(n) * raw.L, raw.L) *= s;
  }
  return out;
}

CMat normalize_output_backward(const BeamformingMatrix& raw, const std::vector<double>& budget,
                               const CMat& dP) {
  check_budget(raw, budget);
  const RVec p_hat = raw_power(raw);
  CMat g = dP;
  for (int n = 0; n < raw.N; ++n) {
    if (p_hat[n] <= budget[n]) continue;
    const Eigen::Index r0 = static_cast<Eigen::Index>(n) * raw.L;
    const auto x = raw.P.middleRows(r0, raw.L);
    const auto gy = dP.middleRows(r0, raw.L);
    const double s = std::sqrt(budget[n] / p_hat[n]);
    const double c = (gy.conjugate().cwiseProduct(x)).sum().real();
    g.middleRows(r0, raw.L) = s * gy - (c * s / p_hat[n]) * x;
  }
  return g;
}

RVec attention_weights(const RVec& query, const RowMajorMat& keys, double scale) {
  if (keys.rows() == 0) throw EmptyNeighborSet("attention over an empty neighbor set");
  if (keys.cols() != query.size()) throw DimensionError("attention key/query width mismatch");
  RVec s = keys * query / scale;
  s.array() -= s.maxCoeff();
  s = s.array().exp();
  return s / s.sum();
}

}  // namespace coisac
