// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

#include "coisac/model.hpp"

namespace coisac {

enum class BaselineKind { kHomoGnn, kNaiveConv, kRandom, kReference };

std::string_view baseline_tag(BaselineKind kind);

// Treats the stacked layer-0 node features (nodes x 2L) as a one-channel
// image: conv(k x k, C1) -> leaky -> conv(k x k, C2) -> leaky -> flatten ->
// Dense(H) -> leaky -> Dense(nodes * 2L), then the same power normalization
// as the graph models. Same-padding, stride 1.
class NaiveConvNet final : public Model {
 public:
  NaiveConvNet(const ModelConfig& mc, const ScenarioConfig& cfg, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::kNaiveConv; }
  const ModelConfig& config() const override { return mc_; }
  std::vector<std::string> relation_names() const override { return {}; }
  BeamformingMatrix forward(const ChannelSample& input,
                            std::unique_ptr<Tape>* tape = nullptr) const override;
  void backward(const Tape& tape, const CMat& dP) override;

 private:
  struct ConvTape;
  struct Conv {
    int W = -1;
    int b = -1;
    int in_ch = 0;
    int out_ch = 0;
  };
  void conv_forward(const Conv& c, const RVec& in, RVec& out) const;
  void conv_backward(const Conv& c, const RVec& in, const RVec& g_out, RVec* g_in);

  ModelConfig mc_;
  HeteroGraph graph_;
  int rows_ = 0;
  int cols_ = 0;
  Conv conv1_, conv2_;
  nn::Dense fc1_, fc2_;
};

// Hidden width that brings the naive network's parameter count closest to
// `target` scalars.
int naive_conv_hidden_for_budget(const ModelConfig& mc, const ScenarioConfig& cfg,
                                 std::size_t target);

// Matched-filter communication beams and steered sensing beams. A fraction
// sensing_share of each BS budget goes to the Z sensing beams (split evenly),
// the rest evenly across users. Exact per-BS power whenever the channels are
// nonzero.
BeamformingMatrix reference_beamformer(const ChannelSample& sample, const ScenarioConfig& cfg,
                                       double sensing_share = 0.3);

// Complex Gaussian beams, each BS block scaled to exactly P_n.
BeamformingMatrix random_beamformer(std::uint64_t seed, const ScenarioConfig& cfg);

}  // namespace coisac
