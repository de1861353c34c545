// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "coisac/scenario.hpp"
#include "coisac/types.hpp"

namespace coisac {

// UPA response toward (theta, beta). Antenna (ix, iz) sits at flat index
// ix * Lz + iz (iz fastest); entry = exp(j k d (ix cos(beta) cos(theta) +
// iz sin(theta))) / sqrt(L) with k = 2 pi / wavelength.
CVec upa_steering(double theta, double beta, int Lx, int Lz, double d_spacing, double wavelength);

struct SteeringDerivatives {
  CVec a;
  CVec da_dtheta;
  CVec da_dbeta;
};

SteeringDerivatives upa_steering_derivatives(double theta, double beta, int Lx, int Lz,
                                             double d_spacing, double wavelength);

inline CVec upa_steering(const ScenarioConfig& cfg, double theta, double beta) {
  return upa_steering(theta, beta, cfg.Lx, cfg.Lz, cfg.d_spacing, cfg.wavelength);
}

struct ChannelSample {
  CMat H;                        // NL x K; column k is h_k, block n is h_{k,n}
  std::vector<Vec3> target_pos;  // Z entries
  // One N x N matrix per target; entry (m, n) is the coefficient of the
  // path transmitted by BS m and received at BS n.
  std::vector<CMat> alphas;
  std::vector<AngleSet> angles;  // per target, consistent with target_pos
  std::uint64_t sample_id = 0;
  std::uint64_t rng_seed = 0;
};

// Global scale applied to every synthetic channel so that the mean
// per-link SNR ||h_{k,n}||^2 * ref_power / noise_power equals ref_snr_db.
// Deterministic per config (estimated on a fixed calibration draw).
double channel_gain_scale(const ScenarioConfig& cfg);

// Geometric LoS + scattered-path channels, users uniform in user_region.
// Sample i draws from derive_seed(seed, Stream::kSampleGen, i). H entries
// are rounded to float precision so the dataset format is lossless.
std::vector<ChannelSample> synth_channels(const ScenarioConfig& cfg, std::size_t n_samples,
                                          std::uint64_t seed);

ChannelSample synth_sample(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t index);

struct PerturbationSpec {
  // Channel-estimate SNR; +inf leaves H untouched.
  double csi_snr_db = std::numeric_limits<double>::infinity();
  // Per-coordinate position error magnitude in [lo, hi); nullopt leaves
  // the target positions untouched.
  struct Range {
    double lo = 0.0;
    double hi = 0.0;
  };
  std::optional<Range> pos_err;
  std::uint64_t seed = 0;

  void validate() const;
};

// Noisy twin of `sample`. The draw depends on (spec.seed, sample.sample_id).
ChannelSample perturb(const ChannelSample& sample, const PerturbationSpec& spec,
                      const ScenarioConfig& cfg);

// Recompute the angle sets of every target from its position.
void refresh_angles(ChannelSample& sample, const ScenarioConfig& cfg);

// ---- dataset file ("CISD") ----

struct DatasetHeader {
  std::uint16_t version = 1;
  std::uint32_t N = 0, K = 0, Z = 0, L = 0, Lx = 0, Lz = 0;
  std::uint32_t n_samples = 0;
  double wavelength = 0.0;
  double d_spacing = 0.0;
};

inline constexpr std::uint16_t kDatasetVersion = 1;

void save_dataset(const std::filesystem::path& path, const ScenarioConfig& cfg,
                  const std::vector<ChannelSample>& samples);
DatasetHeader read_dataset_header(const std::filesystem::path& path);
// Validates the header against cfg (DimensionError) and recomputes angles
// from cfg.bs_positions. sample_id is the record index.
std::vector<ChannelSample> load_dataset(const std::filesystem::path& path,
                                        const ScenarioConfig& cfg);

}  // namespace coisac
