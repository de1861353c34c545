// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "coisac/types.hpp"

namespace coisac {

enum class NodeType { kComm = 0, kSense = 1 };

// Relation types between link nodes. A relation pulls features from
// neighbor_type nodes into center_type nodes.
//   BsCC: comm links at the same BS, other users
//   Ue:   comm links of the same user, other BSs
//   BsCS: comm node <- sensing links at the same BS
//   BsSS: sensing links at the same BS, other targets
//   Tgt:  sensing links of the same target, other BSs
//   BsSC: sensing node <- comm links at the same BS
enum class Relation { kBsCC = 0, kUe, kBsCS, kBsSS, kTgt, kBsSC };

inline constexpr std::array<Relation, 6> kAllRelations = {
    Relation::kBsCC, Relation::kUe, Relation::kBsCS, Relation::kBsSS, Relation::kTgt,
    Relation::kBsSC};

std::string_view relation_name(Relation r);
NodeType center_type(Relation r);
NodeType neighbor_type(Relation r);

struct NodeRef {
  NodeType type = NodeType::kComm;
  int bs = 0;
  int index = 0;  // user k for comm nodes, target z for sensing nodes
};

struct HeteroGraph {
  int N = 0;
  int K = 0;
  int Z = 0;
  std::vector<NodeType> node_type;
  // adjacency[r][v]: neighbors of v under relation r (empty if r does not
  // apply to v's type).
  std::array<std::vector<std::vector<int>>, 6> adjacency;

  int n_nodes() const { return N * K + N * Z; }
  // Communication nodes first (n-major, k-minor), then sensing nodes.
  int comm_node(int n, int k) const { return n * K + k; }
  int sense_node(int n, int z) const { return N * K + n * Z + z; }
  NodeRef locate(int v) const;
  std::size_t edge_count(Relation r) const;
  const std::vector<std::vector<int>>& adj(Relation r) const {
    return adjacency[static_cast<int>(r)];
  }
};

HeteroGraph build_graph(int N, int K, int Z);

// Throws RelationMismatch when r does not apply to v's node type.
const std::vector<int>& neighbors(const HeteroGraph& g, int v, Relation r);

// N(v): the union of all relation neighbor lists, sorted.
std::vector<std::vector<int>> union_adjacency(const HeteroGraph& g);

}  // namespace coisac
