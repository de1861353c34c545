// SPDX-License-Identifier: Apache-2.0
#pragma once

// Straight-loop re-implementation of the graph network forward pass. It
// rebuilds neighbor sets from the link definitions and reads parameters by
// name, so it shares nothing with the library beyond the parameter layout.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "coisac/lhgnn.hpp"

namespace coisac::testing {

using Vecd = std::vector<double>;

struct OracleNode {
  int type;  // 0 comm, 1 sense
  int bs;
  int idx;
};

inline std::vector<OracleNode> oracle_nodes(int N, int K, int Z) {
  std::vector<OracleNode> v;
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) v.push_back({0, n, k});
  for (int n = 0; n < N; ++n)
    for (int z = 0; z < Z; ++z) v.push_back({1, n, z});
  return v;
}

struct OracleRelation {
  std::string name;
  int center;
  std::vector<std::vector<int>> nb;
};

// The six link relations, in storage order, with neighbor lists.
inline std::vector<OracleRelation> oracle_relations(int N, int K, int Z) {
  const auto nodes = oracle_nodes(N, K, Z);
  const int V = static_cast<int>(nodes.size());
  auto find = [&](int type, int bs, int idx) {
    for (int j = 0; j < V; ++j)
      if (nodes[j].type == type && nodes[j].bs == bs && nodes[j].idx == idx) return j;
    return -1;
  };
  std::vector<OracleRelation> rels = {{"bs_cc", 0, {}}, {"ue", 0, {}},
                                      {"bs_cs", 0, {}}, {"bs_ss", 1, {}},
                                      {"tgt", 1, {}},   {"bs_sc", 1, {}}};
  for (auto& r : rels) r.nb.assign(V, {});
  for (int i = 0; i < V; ++i) {
    const auto& a = nodes[i];
    if (a.type == 0) {
      for (int k = 0; k < K; ++k) if (k != a.idx) rels[0].nb[i].push_back(find(0, a.bs, k));
      for (int n = 0; n < N; ++n) if (n != a.bs) rels[1].nb[i].push_back(find(0, n, a.idx));
      for (int z = 0; z < Z; ++z) rels[2].nb[i].push_back(find(1, a.bs, z));
    } else {
      for (int z = 0; z < Z; ++z) if (z != a.idx) rels[3].nb[i].push_back(find(1, a.bs, z));
      for (int n = 0; n < N; ++n) if (n != a.bs) rels[4].nb[i].push_back(find(1, n, a.idx));
      for (int k = 0; k < K; ++k) rels[5].nb[i].push_back(find(0, a.bs, k));
    }
  }
  return rels;
}

class GnnOracle {
 public:
  GnnOracle(const Model& m, bool homo, bool attention)
      : ps_(m.params()), cfg_(m.scenario()), widths_(m.config().widths), homo_(homo),
        attention_(attention) {
    nodes_ = oracle_nodes(cfg_.N, cfg_.K, cfg_.Z);
    const int V = static_cast<int>(nodes_.size());
    if (homo_) {
      OracleRelation all{"all", 0, std::vector<std::vector<int>>(V)};
      for (const auto& r : oracle_relations(cfg_.N, cfg_.K, cfg_.Z))
        for (int i = 0; i < V; ++i)
          all.nb[i].insert(all.nb[i].end(), r.nb[i].begin(), r.nb[i].end());
      for (auto& l : all.nb) std::sort(l.begin(), l.end());
      rels_.push_back(all);
    } else {
      for (auto& r : oracle_relations(cfg_.N, cfg_.K, cfg_.Z)) {
        std::size_t edges = 0;
        for (const auto& l : r.nb) edges += l.size();
        if (edges > 0) rels_.push_back(r);
      }
    }
  }

  int type_of(int i) const { return homo_ ? 0 : nodes_[i].type; }

  Vecd dense(const std::string& name, const Vecd& x) const {
    const auto& W = ps_[ps_.find(name + ".W")].value;
    const auto& b = ps_[ps_.find(name + ".b")].value;
    const int out = static_cast<int>(b.size()), in = static_cast<int>(x.size());
    Vecd y(out);
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      for (int c = 0; c < in; ++c) s += W[o * in + c] * x[c];
      y[o] = s;
    }
    return y;
  }

  static double lk(double v) { return v > 0 ? v : 0.01 * v; }

  std::vector<Vecd> layer(int u, const std::vector<Vecd>& X) const {
    const int V = static_cast<int>(X.size());
    const int b = widths_[u + 1];
    std::vector<Vecd> out(V, Vecd(b, 0.0));
    for (int i = 0; i < V; ++i) {
      int n_rel = 0;
      for (const auto& r : rels_) n_rel += r.center == type_of(i);
      for (const auto& r : rels_) {
        if (r.center != type_of(i)) continue;
        const std::string base = "l" + std::to_string(u) + "." + r.name;
        Vecd F = dense(base + ".f1", X[i]);
        const auto& nb = r.nb[i];
        if (!nb.empty()) {
          Vecd lam(nb.size(), 1.0 / nb.size());
          if (attention_) {
            const Vecd q = dense(base + ".f3", X[i]);
            Vecd s(nb.size());
            double mx = -1e300;
            for (std::size_t j = 0; j < nb.size(); ++j) {
              const Vecd k = dense(base + ".f4", X[nb[j]]);
              double d = 0;
              for (int c = 0; c < b; ++c) d += q[c] * k[c];
              s[j] = d / b;
              mx = std::max(mx, s[j]);
            }
            double tot = 0;
            for (auto& v : s) tot += (v = std::exp(v - mx));
            for (std::size_t j = 0; j < nb.size(); ++j) lam[j] = s[j] / tot;
          }
          for (std::size_t j = 0; j < nb.size(); ++j) {
            const Vecd m = dense(base + ".f2", X[nb[j]]);
            for (int c = 0; c < b; ++c) F[c] += lam[j] * m[c] / nb.size();
          }
        }
        for (auto& v : F) v = lk(v);
        double mean = 0, var = 0;
        for (double v : F) mean += v;
        mean /= b;
        for (double v : F) var += (v - mean) * (v - mean);
        var /= b;
        const auto& g = ps_[ps_.find(base + ".ln.gamma")].value;
        const auto& be = ps_[ps_.find(base + ".ln.beta")].value;
        for (int c = 0; c < b; ++c) {
          out[i][c] += (g[c] * (F[c] - mean) / std::sqrt(var + 1e-5) + be[c]) / n_rel;
        }
      }
    }
    return out;
  }

  std::vector<Vecd> features(const ChannelSample& s) const {
    const int L = cfg_.L();
    std::vector<Vecd> X;
    for (const auto& nd : nodes_) {
      Vecd x(2 * L);
      CVec v = nd.type == 0 ? CVec(s.H.block(nd.bs * L, nd.idx, L, 1))
                            : upa_steering(cfg_, s.angles[nd.idx].theta[nd.bs],
                                           s.angles[nd.idx].beta[nd.bs]);
      for (int l = 0; l < L; ++l) {
        x[l] = v[l].real();
        x[L + l] = v[l].imag();
      }
      X.push_back(x);
    }
    return X;
  }

  CMat forward(const ChannelSample& s) const {
    std::vector<Vecd> X = features(s);
    for (std::size_t u = 0; u + 1 < widths_.size(); ++u) X = layer(static_cast<int>(u), X);
    const int L = cfg_.L();
    CMat P = CMat::Zero(cfg_.NL(), cfg_.K + cfg_.Z);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const std::string head =
          std::string("head.") + (homo_ ? "node" : (nodes_[i].type == 0 ? "comm" : "sense"));
      Vecd h = dense(head + ".0", X[i]);
      for (auto& v : h) v = lk(v);
      const Vecd o = dense(head + ".1", h);
      const int col = nodes_[i].type == 0 ? cfg_.Z + nodes_[i].idx : nodes_[i].idx;
      for (int l = 0; l < L; ++l) P(nodes_[i].bs * L + l, col) = cplx(o[l], o[L + l]);
    }
    for (int n = 0; n < cfg_.N; ++n) {
      double pw = 0;
      for (int r = 0; r < L; ++r)
        for (int c = 0; c < P.cols(); ++c) pw += std::norm(P(n * L + r, c));
      const double Pn = cfg_.power_budget[n];
      const double scale = std::sqrt(Pn) / std::max(std::sqrt(Pn), std::sqrt(pw));
      for (int r = 0; r < L; ++r)
        for (int c = 0; c < P.cols(); ++c) P(n * L + r, c) *= scale;
    }
    return P;
  }

 private:
  const nn::ParamSet& ps_;
  ScenarioConfig cfg_;
  std::vector<int> widths_;
  bool homo_;
  bool attention_;
  std::vector<OracleNode> nodes_;
  std::vector<OracleRelation> rels_;
};

}  // namespace coisac::testing
