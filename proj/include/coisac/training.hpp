// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "coisac/channel.hpp"
#include "coisac/checkpoint.hpp"
#include "coisac/fisher.hpp"
#include "coisac/model.hpp"

namespace coisac {

struct TrainConfig {
  int epochs = 800;
  int batch_size = 64;
  double lr = 2e-4;
  double weight_decay = 5e-4;
  double rho1_slope = 0.8;
  double rho2_slope = 0.5;
  double r_min = 0.05;  // bits/s/Hz per user
  double gamma = 0.0;   // SPEB threshold, m^2
  std::uint64_t seed = 0;
  std::optional<PerturbationSpec> perturbation;

  void validate() const;  // throws ConfigError
};

struct Penalty {
  double rho1 = 0.0;
  double rho2 = 0.0;
};

// rho = slope * epoch, epoch 1-based.
Penalty penalty_schedule(int epoch, const TrainConfig& cfg);

// Per-sample loss pieces. The SPEB hinge is summed over targets.
struct SampleLoss {
  double sum_rate = 0.0;
  double rate_hinge = 0.0;  // sum_k max(0, r - R_k)
  double speb_hinge = 0.0;  // sum_z max(0, SPEB_z - gamma)
  std::vector<double> rates;
  std::vector<double> speb;  // per target
  bool ill_conditioned = false;
};

// Everything the penalty loss needs for one clean sample.
struct LossContext {
  const ScenarioConfig* cfg = nullptr;
  double gamma = 0.0;
  double r_min = 0.0;
  ProjectorCache* cache = nullptr;
};

SampleLoss sample_loss(const BeamformingMatrix& P, const ChannelSample& clean, const LossContext& ctx);

// dL_i/dP for one sample in the d/dRe + j d/dIm convention (not divided by
// the batch size).
CMat sample_loss_gradient(const BeamformingMatrix& P, const ChannelSample& clean,
                          const LossContext& ctx, const Penalty& rho, const SampleLoss& value);

struct BatchLoss {
  double total = 0.0;
  double mean_sum_rate = 0.0;
  double mean_speb = 0.0;  // averaged over samples and targets
  double viol_speb_frac = 0.0;
  double viol_rate_frac = 0.0;  // fraction of (sample, user) pairs below r
  std::size_t ill_conditioned = 0;
};

// -mean sum rate + rho1 mean speb hinge + rho2 mean rate hinge, evaluated on
// the clean samples.
BatchLoss loss(const std::vector<BeamformingMatrix>& P, const std::vector<const ChannelSample*>& clean,
               const LossContext& ctx, const Penalty& rho);

// Median SPEB of the reference beamformer over the calibration samples
// (all targets pooled). Needs at least 16 samples.
double default_gamma(const ScenarioConfig& cfg, const std::vector<ChannelSample>& calib);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double mean_rate = 0.0;
  double mean_speb = 0.0;
  double viol_speb_frac = 0.0;
  double viol_rate_frac = 0.0;
  double max_power_excess = 0.0;  // max over samples/BSs of power - budget
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  MetaList meta;
  double wall_seconds = 0.0;
  std::string checkpoint;
  bool lr_halved = false;
};

void write_report_csv(const std::filesystem::path& path, const TrainReport& report);

// Optimizer state plus the next epoch to run; carried across resumes.
struct TrainState {
  nn::AdamW optimizer;
  int next_epoch = 1;
};

using EpochCallback = std::function<void(const EpochRecord&, const Model&, const TrainState&)>;

// Runs epochs state.next_epoch .. cfg.epochs. Batches come from a per-epoch
// permutation derived from (seed, epoch), so a resumed run sees the same
// order. Non-finite loss: restore the epoch start, halve lr, retry once; a
// second failure throws NonFiniteLoss.
TrainReport train(Model& model, const std::vector<ChannelSample>& data, const TrainConfig& cfg,
                  TrainState& state, const EpochCallback& on_epoch = {});

struct EvalResult {
  double mean_sum_rate = 0.0;
  double mean_speb = 0.0;
  double viol_speb_frac = 0.0;
  double viol_rate_frac = 0.0;
  double max_power_excess = 0.0;
  std::vector<double> sum_rates;  // per sample
  std::vector<double> speb;       // per sample, target 0
};

// Forward on (optionally perturbed) inputs, metrics on the clean samples.
EvalResult evaluate(const Model& model, const std::vector<ChannelSample>& data, double gamma,
                    double r_min, const std::optional<PerturbationSpec>& perturbation = {});

// Same metrics for a fixed beamformer rule.
EvalResult evaluate_beams(const std::function<BeamformingMatrix(const ChannelSample&)>& rule,
                          const ScenarioConfig& cfg, const std::vector<ChannelSample>& data,
                          double gamma, double r_min);

// FNV-1a over the float payload of a dataset; used to check that clean
// samples are never modified.
std::uint64_t dataset_hash(const std::vector<ChannelSample>& data);

}  // namespace coisac
