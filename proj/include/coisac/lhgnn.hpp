// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "coisac/model.hpp"

namespace coisac {

struct GraphRelation {
  std::string name;
  int center_type = 0;
  int neighbor_type = 0;
  std::vector<std::vector<int>> adj;  // per node; empty for other types
};

// Node typing and relation lists a GraphNet aggregates over. Relations with
// no edges anywhere in the graph are omitted.
struct GraphTopology {
  int n_types = 0;
  std::vector<int> node_type;
  std::vector<GraphRelation> relations;
};

// Two node types (comm, sensing) and the non-empty subset of the six relations.
GraphTopology hetero_topology(const HeteroGraph& g);
// One node type and one relation whose neighbor lists are N(v).
GraphTopology homo_topology(const HeteroGraph& g);

// Message-passing network shared by LHGNN (hetero topology), its
// no-attention ablation, and the homogeneous baseline.
//
// Layer u, node i of type t, each relation r centered on t:
//   F_r = f1_r(x_i) + (1/|N_r(i)|) sum_j lambda_r(i,j) f2_r(x_j)
//   x_i' = (1/|R_t|) sum_r LN_r(leaky(F_r))
// lambda is the softmax of f3_r(x_i) . f4_r(x_j) / L^u over N_r(i), or
// 1/|N_r(i)| with attention disabled. A node with no neighbors under r keeps
// F_r = f1_r(x_i). Head per node type: Dense(L^U, H) -> leaky -> Dense(H, 2L).
class GraphNet final : public Model {
 public:
  GraphNet(const ModelConfig& mc, const ScenarioConfig& cfg, GraphTopology topo,
           std::uint64_t seed);

  ModelKind kind() const override { return mc_.kind; }
  const ModelConfig& config() const override { return mc_; }
  std::vector<std::string> relation_names() const override;
  BeamformingMatrix forward(const ChannelSample& input,
                            std::unique_ptr<Tape>* tape = nullptr) const override;
  void backward(const Tape& tape, const CMat& dP) override;

  bool attention() const { return attention_; }
  int n_layers() const { return static_cast<int>(layers_.size()); }
  const HeteroGraph& graph() const { return graph_; }
  const GraphTopology& topology() const { return topo_; }

  RowMajorMat layer_forward(int u, const RowMajorMat& X) const;
  // Raw per-node outputs (n_nodes x 2L) before the power normalization.
  RowMajorMat head_forward(const RowMajorMat& X) const;
  // Places raw node outputs into the beamforming layout.
  BeamformingMatrix assemble(const RowMajorMat& raw) const;

  // Attention weights of one node under relation index r at layer u.
  RVec node_attention(int u, int r, const RowMajorMat& X, int node) const;

 private:
  struct RelParams {
    nn::Dense f1, f2, f3, f4;
    nn::LayerNorm ln;
  };
  struct LayerTape;
  struct NetTape;

  RowMajorMat layer_forward_impl(int u, const RowMajorMat& X, LayerTape* tape) const;
  RowMajorMat layer_backward(int u, const LayerTape& tape, const RowMajorMat& gOut);

  ModelConfig mc_;
  GraphTopology topo_;
  HeteroGraph graph_;
  bool attention_ = true;
  int head_hidden_ = 0;
  std::vector<std::vector<int>> nodes_of_type_;
  std::vector<int> relations_per_type_;
  std::vector<std::vector<RelParams>> layers_;
  std::vector<std::array<nn::Dense, 2>> heads_;
};

}  // namespace coisac
