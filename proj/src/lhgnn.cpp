// SPDX-License-Identifier: Apache-2.0
#include "coisac/lhgnn.hpp"

#include <cmath>
#include <string>

namespace coisac {

GraphTopology hetero_topology(const HeteroGraph& g) {
  GraphTopology t;
  t.n_types = 2;
  for (NodeType nt : g.node_type) t.node_type.push_back(static_cast<int>(nt));
  for (Relation r : kAllRelations) {
    if (g.edge_count(r) == 0) continue;
    t.relations.push_back({std::string(relation_name(r)), static_cast<int>(center_type(r)),
                           static_cast<int>(neighbor_type(r)), g.adj(r)});
  }
  return t;
}

GraphTopology homo_topology(const HeteroGraph& g) {
  GraphTopology t;
  t.n_types = 1;
  t.node_type.assign(g.n_nodes(), 0);
  t.relations.push_back({"all", 0, 0, union_adjacency(g)});
  return t;
}

struct GraphNet::LayerTape {
  struct Rel {
    RowMajorMat F;  // pre-activation, center rows
    RowMajorMat M;  // f2 outputs, neighbor-type rows
    RowMajorMat Q;  // f3 outputs
    RowMajorMat K;  // f4 outputs
    std::vector<RVec> lambda;
    std::vector<nn::LayerNorm::Cache> ln;
  };
  RowMajorMat X;
  std::vector<Rel> rels;
};

struct GraphNet::NetTape : Tape {
  std::vector<LayerTape> layers;
  RowMajorMat X_final;
  RowMajorMat hidden_pre;  // head hidden pre-activation per node
  BeamformingMatrix raw;
};

GraphNet::GraphNet(const ModelConfig& mc, const ScenarioConfig& cfg, GraphTopology topo,
                   std::uint64_t seed)
    : Model(cfg), mc_(mc), topo_(std::move(topo)), graph_(build_graph(cfg.N, cfg.K, cfg.Z)) {
  const int L = cfg.L();
  if (mc_.widths.size() < 2) throw ConfigError("width schedule needs at least two entries");
  if (mc_.widths.front() != 2 * L) {
    throw ConfigError("first width must be 2L = " + std::to_string(2 * L));
  }
  for (int w : mc_.widths) {
    if (w < 1) throw ConfigError("widths must be >= 1");
  }
  if (static_cast<int>(topo_.node_type.size()) != graph_.n_nodes()) {
    throw DimensionError("topology does not match the scenario graph");
  }
  attention_ = mc_.kind != ModelKind::kLhgnnNoAttention;
  head_hidden_ = mc_.head_hidden > 0 ? mc_.head_hidden : 4 * L;

  nodes_of_type_.assign(topo_.n_types, {});
  for (int v = 0; v < graph_.n_nodes(); ++v) nodes_of_type_[topo_.node_type[v]].push_back(v);
  relations_per_type_.assign(topo_.n_types, 0);
  for (const auto& r : topo_.relations) ++relations_per_type_[r.center_type];

  Rng rng = make_rng(seed, Stream::kParamInit, 0);
  const int U = static_cast<int>(mc_.widths.size()) - 1;
  layers_.resize(U);
  for (int u = 0; u < U; ++u) {
    const int a = mc_.widths[u], b = mc_.widths[u + 1];
    for (const auto& rel : topo_.relations) {
      const std::string base = "l" + std::to_string(u) + "." + rel.name;
      RelParams p;
      p.f1 = nn::Dense::create(params_, base + ".f1", a, b);
      p.f2 = nn::Dense::create(params_, base + ".f2", a, b);
      if (attention_) {
        p.f3 = nn::Dense::create(params_, base + ".f3", a, b);
        p.f4 = nn::Dense::create(params_, base + ".f4", a, b);
      }
      p.ln = nn::LayerNorm::create(params_, base + ".ln", b);
      p.f1.init(params_, rng);
      p.f2.init(params_, rng);
      if (attention_) {
        p.f3.init(params_, rng);
        p.f4.init(params_, rng);
      }
      layers_[u].push_back(p);
    }
  }
  const char* type_names[2] = {"comm", "sense"};
  for (int t = 0; t < topo_.n_types; ++t) {
    const std::string base = std::string("head.") + (topo_.n_types == 1 ? "node" : type_names[t]);
    std::array<nn::Dense, 2> h{nn::Dense::create(params_, base + ".0", mc_.widths.back(), head_hidden_),
                               nn::Dense::create(params_, base + ".1", head_hidden_, 2 * L)};
    h[0].init(params_, rng);
    h[1].init(params_, rng);
    heads_.push_back(h);
  }
}

std::vector<std::string> GraphNet::relation_names() const {
  std::vector<std::string> out;
  for (const auto& r : topo_.relations) out.push_back(r.name);
  return out;
}

RVec GraphNet::node_attention(int u, int r, const RowMajorMat& X, int node) const {
  const auto& rel = topo_.relations.at(r);
  const auto& nb = rel.adj.at(node);
  const int b = mc_.widths[u + 1];
  if (nb.empty()) throw EmptyNeighborSet("node " + std::to_string(node) + " has no neighbors");
  if (!attention_) return RVec::Constant(static_cast<Eigen::Index>(nb.size()), 1.0 / nb.size());
  const RelParams& p = layers_[u][r];
  RVec q(b);
  p.f3.forward(params_, X.row(node).data(), q.data());
  RowMajorMat keys(nb.size(), b);
  for (std::size_t j = 0; j < nb.size(); ++j) {
    p.f4.forward(params_, X.row(nb[j]).data(), keys.row(j).data());
  }
  return attention_weights(q, keys, b);
}

RowMajorMat GraphNet::layer_forward(int u, const RowMajorMat& X) const {
  return layer_forward_impl(u, X, nullptr);
}

RowMajorMat GraphNet::layer_forward_impl(int u, const RowMajorMat& X, LayerTape* tape) const {
  const int a = mc_.widths[u], b = mc_.widths[u + 1];
  const Eigen::Index n = graph_.n_nodes();
  if (X.rows() != n || X.cols() != a) {
    throw DimensionError("layer " + std::to_string(u) + " expects " + std::to_string(n) + "x" +
                         std::to_string(a) + " features");
  }
  RowMajorMat out = RowMajorMat::Zero(n, b);
  if (tape) {
    tape->X = X;
    tape->rels.assign(topo_.relations.size(), {});
  }
  for (std::size_t r = 0; r < topo_.relations.size(); ++r) {
    const GraphRelation& rel = topo_.relations[r];
    const RelParams& p = layers_[u][r];
    RowMajorMat F = RowMajorMat::Zero(n, b), M = RowMajorMat::Zero(n, b);
    RowMajorMat Q, K;
    if (attention_) {
      Q = RowMajorMat::Zero(n, b);
      K = RowMajorMat::Zero(n, b);
    }
    for (int j : nodes_of_type_[rel.neighbor_type]) {
      p.f2.forward(params_, X.row(j).data(), M.row(j).data());
      if (attention_) p.f4.forward(params_, X.row(j).data(), K.row(j).data());
    }
    std::vector<RVec> lambdas(n);
    std::vector<nn::LayerNorm::Cache> ln_cache(n);
    const double inv_rel = 1.0 / relations_per_type_[rel.center_type];
    RVec act(b), y(b);
    for (int i : nodes_of_type_[rel.center_type]) {
      p.f1.forward(params_, X.row(i).data(), F.row(i).data());
      const auto& nb = rel.adj[i];
      if (!nb.empty()) {
        RVec lam;
        if (attention_) {
          p.f3.forward(params_, X.row(i).data(), Q.row(i).data());
          RowMajorMat keys(nb.size(), b);
          for (std::size_t j = 0; j < nb.size(); ++j) keys.row(j) = K.row(nb[j]);
          lam = attention_weights(Q.row(i).transpose(), keys, b);
        } else {
          lam = RVec::Constant(static_cast<Eigen::Index>(nb.size()), 1.0 / nb.size());
        }
        const double inv_n = 1.0 / nb.size();
        for (std::size_t j = 0; j < nb.size(); ++j) F.row(i) += (lam[j] * inv_n) * M.row(nb[j]);
        lambdas[i] = std::move(lam);
      }
      for (int c = 0; c < b; ++c) act[c] = nn::leaky(F(i, c));
      p.ln.forward(params_, act.data(), y.data(), ln_cache[i]);
      out.row(i) += inv_rel * y.transpose();
    }
    if (tape) {
      auto& t = tape->rels[r];
      t.F = std::move(F);
      t.M = std::move(M);
      t.Q = std::move(Q);
      t.K = std::move(K);
      t.lambda = std::move(lambdas);
      t.ln = std::move(ln_cache);
    }
  }
  return out;
}

RowMajorMat GraphNet::layer_backward(int u, const LayerTape& tape, const RowMajorMat& gOut) {
  const int a = mc_.widths[u], b = mc_.widths[u + 1];
  const Eigen::Index n = graph_.n_nodes();
  const RowMajorMat& X = tape.X;
  RowMajorMat gX = RowMajorMat::Zero(n, a);
  RVec gY(b), gF(b), gQ(b);
  for (std::size_t r = 0; r < topo_.relations.size(); ++r) {
    const GraphRelation& rel = topo_.relations[r];
    const RelParams& p = layers_[u][r];
    const auto& t = tape.rels[r];
    RowMajorMat gM = RowMajorMat::Zero(n, b), gK;
    if (attention_) gK = RowMajorMat::Zero(n, b);
    const double inv_rel = 1.0 / relations_per_type_[rel.center_type];
    for (int i : nodes_of_type_[rel.center_type]) {
      gY = inv_rel * gOut.row(i).transpose();
      gF.setZero();
      p.ln.backward(params_, t.ln[i], gY.data(), gF.data());
      for (int c = 0; c < b; ++c) gF[c] *= nn::leaky_grad(t.F(i, c));
      p.f1.backward(params_, X.row(i).data(), gF.data(), gX.row(i).data());
      const auto& nb = rel.adj[i];
      if (nb.empty()) continue;
      const RVec& lam = t.lambda[i];
      const double inv_n = 1.0 / nb.size();
      for (std::size_t j = 0; j < nb.size(); ++j) gM.row(nb[j]) += (lam[j] * inv_n) * gF.transpose();
      if (!attention_) continue;
      RVec glam(nb.size());
      for (std::size_t j = 0; j < nb.size(); ++j) glam[j] = inv_n * t.M.row(nb[j]).dot(gF);
      const double mean_g = lam.dot(glam);
      gQ.setZero();
      for (std::size_t j = 0; j < nb.size(); ++j) {
        const double gs = lam[j] * (glam[j] - mean_g) / b;
        gQ += gs * t.K.row(nb[j]).transpose();
        gK.row(nb[j]) += gs * t.Q.row(i);
      }
      p.f3.backward(params_, X.row(i).data(), gQ.data(), gX.row(i).data());
    }
    for (int j : nodes_of_type_[rel.neighbor_type]) {
      p.f2.backward(params_, X.row(j).data(), gM.row(j).data(), gX.row(j).data());
      if (attention_) p.f4.backward(params_, X.row(j).data(), gK.row(j).data(), gX.row(j).data());
    }
  }
  return gX;
}

RowMajorMat GraphNet::head_forward(const RowMajorMat& X) const {
  const int L = cfg_.L();
  RowMajorMat raw(graph_.n_nodes(), 2 * L);
  RVec h(head_hidden_);
  for (int v = 0; v < graph_.n_nodes(); ++v) {
    const auto& hd = heads_[topo_.node_type[v]];
    hd[0].forward(params_, X.row(v).data(), h.data());
    for (int c = 0; c < head_hidden_; ++c) h[c] = nn::leaky(h[c]);
    hd[1].forward(params_, h.data(), raw.row(v).data());
  }
  return raw;
}

BeamformingMatrix GraphNet::assemble(const RowMajorMat& raw) const {
  return assemble_node_outputs(raw, cfg_, graph_);
}

BeamformingMatrix GraphNet::forward(const ChannelSample& input, std::unique_ptr<Tape>* tape) const {
  RowMajorMat X = init_features(input, cfg_, graph_);
  NetTape* t = nullptr;
  if (tape) {
    auto nt = std::make_unique<NetTape>();
    t = nt.get();
    t->layers.resize(layers_.size());
    *tape = std::move(nt);
  }
  for (int u = 0; u < n_layers(); ++u) X = layer_forward_impl(u, X, t ? &t->layers[u] : nullptr);
  if (t) {
    t->X_final = X;
    t->hidden_pre.resize(graph_.n_nodes(), head_hidden_);
    for (int v = 0; v < graph_.n_nodes(); ++v) {
      heads_[topo_.node_type[v]][0].forward(params_, X.row(v).data(), t->hidden_pre.row(v).data());
    }
  }
  BeamformingMatrix raw = assemble(head_forward(X));
  BeamformingMatrix out = normalize_output(raw, cfg_.power_budget);
  if (t) t->raw = std::move(raw);
  return out;
}

void GraphNet::backward(const Tape& tape_base, const CMat& dP) {
  const auto& t = dynamic_cast<const NetTape&>(tape_base);
  const CMat g_raw = normalize_output_backward(t.raw, cfg_.power_budget, dP);
  const RowMajorMat g_nodes = node_output_gradient(g_raw, cfg_, graph_);
  const Eigen::Index n = graph_.n_nodes();
  RowMajorMat gX = RowMajorMat::Zero(n, mc_.widths.back());
  RVec h(head_hidden_), gh(head_hidden_);
  for (int v = 0; v < n; ++v) {
    const auto& hd = heads_[topo_.node_type[v]];
    for (int c = 0; c < head_hidden_; ++c) h[c] = nn::leaky(t.hidden_pre(v, c));
    gh.setZero();
    hd[1].backward(params_, h.data(), g_nodes.row(v).data(), gh.data());
    for (int c = 0; c < head_hidden_; ++c) gh[c] *= nn::leaky_grad(t.hidden_pre(v, c));
    hd[0].backward(params_, t.X_final.row(v).data(), gh.data(), gX.row(v).data());
  }
  for (int u = n_layers() - 1; u >= 0; --u) gX = layer_backward(u, t.layers[u], gX);
}

}  // namespace coisac
