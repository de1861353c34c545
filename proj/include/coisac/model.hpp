// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "coisac/channel.hpp"
#include "coisac/commetrics.hpp"
#include "coisac/hetgraph.hpp"
#include "coisac/nn.hpp"
#include "coisac/scenario.hpp"

namespace coisac {

enum class ModelKind { kLhgnn, kLhgnnNoAttention, kHomoGnn, kNaiveConv };

std::string_view model_tag(ModelKind kind);
ModelKind parse_model_tag(std::string_view tag);  // throws ConfigError

struct ModelConfig {
  ModelKind kind = ModelKind::kLhgnn;
  // Feature widths L^0 .. L^U; widths.front() must be 2L.
  std::vector<int> widths;
  int head_hidden = 0;  // 0 selects 4L
  // naive_conv only
  int conv_channels1 = 4;
  int conv_channels2 = 8;
  int conv_kernel = 3;
  int fc_hidden = 0;  // 0 sizes the hidden layer to match the GNN parameter budget
};

// Width schedule [2L, 128, 128, 128, 256, 512, 256, 128, 2L].
std::vector<int> paper_widths(int L);
// Reduced schedule for desk-scale runs: [2L, 32, 32, 32].
std::vector<int> smoke_widths(int L);

// Per-sample intermediate values kept for the backward pass.
struct Tape {
  virtual ~Tape() = default;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual ModelKind kind() const = 0;
  virtual const ModelConfig& config() const = 0;
  // Relation names carried by the parameter set (empty for naive_conv).
  virtual std::vector<std::string> relation_names() const = 0;

  // Power-feasible beams for one (possibly noisy) input sample. When tape is
  // non-null it receives what backward needs.
  virtual BeamformingMatrix forward(const ChannelSample& input,
                                    std::unique_ptr<Tape>* tape = nullptr) const = 0;
  // dL/dP in the d/dRe + j d/dIm convention; accumulates into params().grad.
  virtual void backward(const Tape& tape, const CMat& dP) = 0;

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const ScenarioConfig& scenario() const { return cfg_; }
  // Budgets used by the output normalization (sweeps over power reuse one
  // set of weights).
  void set_power_budget(const std::vector<double>& watts);

 protected:
  explicit Model(ScenarioConfig cfg) : cfg_(std::move(cfg)) {}
  nn::ParamSet params_;
  ScenarioConfig cfg_;
};

std::unique_ptr<Model> make_model(const ModelConfig& mc, const ScenarioConfig& cfg,
                                  std::uint64_t seed);

// Node features at layer 0, one row per graph node: [Re h_{k,n}; Im h_{k,n}]
// for communication nodes, [Re a; Im a] of the target steering vector for
// sensing nodes.
RowMajorMat init_features(const ChannelSample& sample, const ScenarioConfig& cfg,
                          const HeteroGraph& g);

// Places per-node raw outputs [Re; Im] (graph node order) into the
// beamforming layout, and the reverse mapping for gradients.
BeamformingMatrix assemble_node_outputs(const RowMajorMat& raw, const ScenarioConfig& cfg,
                                        const HeteroGraph& g);
RowMajorMat node_output_gradient(const CMat& dP, const ScenarioConfig& cfg, const HeteroGraph& g);

// Scales every beam of BS n by sqrt(P_n) / max(sqrt(P_n), sqrt(Phat_n)).
BeamformingMatrix normalize_output(const BeamformingMatrix& raw, const std::vector<double>& budget);
// Gradient through normalize_output. At Phat_n == P_n the unscaled branch is
// used.
CMat normalize_output_backward(const BeamformingMatrix& raw, const std::vector<double>& budget,
                               const CMat& dP);

// Softmax of keys * query / scale with max subtraction. keys holds one
// neighbor per row. Throws EmptyNeighborSet when keys has no rows.
RVec attention_weights(const RVec& query, const RowMajorMat& keys, double scale);

}  // namespace coisac
