// SPDX-License-Identifier: Apache-2.0
#include "coisac/hetgraph.hpp"

#include <algorithm>
#include <string>

namespace coisac {

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::kBsCC: return "bs_cc";
    case Relation::kUe: return "ue";
    case Relation::kBsCS: return "bs_cs";
    case Relation::kBsSS: return "bs_ss";
    case Relation::kTgt: return "tgt";
    case Relation::kBsSC: return "bs_sc";
  }
  return "?";
}

NodeType center_type(Relation r) {
  switch (r) {
    case Relation::kBsCC:
    case Relation::kUe:
    case Relation::kBsCS: return NodeType::kComm;
    default: return NodeType::kSense;
  }
}

NodeType neighbor_type(Relation r) {
  switch (r) {
    case Relation::kBsCC:
    case Relation::kUe:
    case Relation::kBsSC: return NodeType::kComm;
    default: return NodeType::kSense;
  }
}

NodeRef HeteroGraph::locate(int v) const {
  if (v < 0 || v >= n_nodes()) throw DimensionError("node " + std::to_string(v) + " out of range");
  if (v < N * K) return {NodeType::kComm, v / K, v % K};
  const int s = v - N * K;
  return {NodeType::kSense, s / Z, s % Z};
}

std::size_t HeteroGraph::edge_count(Relation r) const {
  std::size_t e = 0;
  for (const auto& nb : adj(r)) e += nb.size();
  return e;
}

HeteroGraph build_graph(int N, int K, int Z) {
  if (N < 1 || K < 1 || Z < 1) throw ConfigError("graph needs N, K, Z >= 1");
  HeteroGraph g;
  g.N = N;
  g.K = K;
  g.Z = Z;
  const int V = g.n_nodes();
  g.node_type.assign(V, NodeType::kComm);
  for (auto& a : g.adjacency) a.assign(V, {});
  auto at = [&](Relation r) -> std::vector<std::vector<int>>& {
    return g.adjacency[static_cast<int>(r)];
  };

  for (int n = 0; n < N; ++n) {
    for (int z = 0; z < Z; ++z) g.node_type[g.sense_node(n, z)] = NodeType::kSense;
  }
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const int v = g.comm_node(n, k);
      for (int k2 = 0; k2 < K; ++k2) {
        if (k2 != k) at(Relation::kBsCC)[v].push_back(g.comm_node(n, k2));
      }
      for (int n2 = 0; n2 < N; ++n2) {
        if (n2 != n) at(Relation::kUe)[v].push_back(g.comm_node(n2, k));
      }
      for (int z = 0; z < Z; ++z) at(Relation::kBsCS)[v].push_back(g.sense_node(n, z));
    }
    for (int z = 0; z < Z; ++z) {
      const int v = g.sense_node(n, z);
      for (int z2 = 0; z2 < Z; ++z2) {
        if (z2 != z) at(Relation::kBsSS)[v].push_back(g.sense_node(n, z2));
      }
      for (int n2 = 0; n2 < N; ++n2) {
        if (n2 != n) at(Relation::kTgt)[v].push_back(g.sense_node(n2, z));
      }
      for (int k = 0; k < K; ++k) at(Relation::kBsSC)[v].push_back(g.comm_node(n, k));
    }
  }
  return g;
}

const std::vector<int>& neighbors(const HeteroGraph& g, int v, Relation r) {
  const NodeRef ref = g.locate(v);
  if (ref.type != center_type(r)) {
    throw RelationMismatch("relation " + std::string(relation_name(r)) +
                           " does not apply to node " + std::to_string(v));
  }
  return g.adj(r)[v];
}

std::vector<std::vector<int>> union_adjacency(const HeteroGraph& g) {
  std::vector<std::vector<int>> out(g.n_nodes());
  for (Relation r : kAllRelations) {
    for (int v = 0; v < g.n_nodes(); ++v) {
      const auto& nb = g.adj(r)[v];
      out[v].insert(out[v].end(), nb.begin(), nb.end());
    }
  }
  for (auto& nb : out) std::sort(nb.begin(), nb.end());
  return out;
}

}  // namespace coisac
