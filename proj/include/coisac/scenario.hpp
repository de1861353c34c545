// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coisac/types.hpp"

namespace coisac {

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

// Synthetic multipath channel knobs (see channel.hpp for the model).
struct ChannelModel {
  int n_paths = 3;
  // Power of each scattered path relative to the LoS path.
  double scatter_power = 0.1;
  // Mean per-link receive SNR at full single-beam power ref_power.
  double ref_snr_db = 10.0;
  double ref_power = 0.1;  // watts
};

struct ScenarioConfig {
  int N = 0;  // base stations
  int K = 0;  // users
  int Z = 0;  // sensing targets
  int Lx = 1;
  int Lz = 1;
  double d_spacing = 0.0;   // meters
  double wavelength = 0.0;  // meters
  std::vector<Vec3> bs_positions;
  std::vector<Vec3> target_positions;
  Box user_region;
  std::vector<double> power_budget;  // watts, one per BS
  double noise_power = 1.0;          // sigma^2, watts
  double rcs_scale = 1.0;
  ChannelModel channel;

  int L() const { return Lx * Lz; }
  int NL() const { return N * L(); }

  // Throws ConfigError or DegenerateGeometry.
  void validate() const;

  // Same geometry with every per-BS budget set to `watts`.
  ScenarioConfig with_power(double watts) const;
};

// Three-BS, five-user, 4x4-UPA, 28 GHz layout with the target used in the
// published setup.
ScenarioConfig paper_scenario();
// Two BSs, two users, 2x2 UPA. Small enough for fast end-to-end training.
ScenarioConfig smoke_scenario();

ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(const std::string& yaml_text);
std::string scenario_to_yaml(const ScenarioConfig& cfg);

struct TargetAngles {
  double theta = 0.0;  // elevation, [-pi/2, pi/2]
  double beta = 0.0;   // azimuth, (-pi, pi]
  double dist = 0.0;
  double dist_xy = 0.0;
};

// Elevation/azimuth/distances of `tgt` seen from `bs`.
// Throws DegenerateGeometry when tgt lies on the vertical axis through bs.
TargetAngles target_angles(const Vec3& bs, const Vec3& tgt);

struct AngleRows {
  Vec3 dtheta_dt;
  Vec3 dbeta_dt;
};

AngleRows angle_jacobian(const Vec3& bs, const Vec3& tgt);

// Per-BS angles of one target.
struct AngleSet {
  std::vector<double> theta;
  std::vector<double> beta;
  std::vector<double> dist;
  std::vector<double> dist_xy;
};

AngleSet angle_set(const std::vector<Vec3>& bs_positions, const Vec3& tgt);

// Q = d[theta; beta]/dt, 2N x 3, theta rows first.
struct PositionJacobian {
  RMat Q;
};

PositionJacobian position_jacobian(const std::vector<Vec3>& bs_positions, const Vec3& tgt);
PositionJacobian position_jacobian(const ScenarioConfig& cfg, int target_index);

}  // namespace coisac
