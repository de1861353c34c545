// SPDX-License-Identifier: Apache-2.0
#include "coisac/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace coisac {

void ScenarioConfig::validate() const {
  if (N < 1 || K < 1 || Z < 1) throw ConfigError("N, K and Z must all be >= 1");
  if (Lx < 1 || Lz < 1) throw ConfigError("array dimensions Lx, Lz must be >= 1");
  if (static_cast<int>(bs_positions.size()) != N) {
    throw ConfigError("bs_positions has " + std::to_string(bs_positions.size()) +
                      " entries, expected N=" + std::to_string(N));
  }
  if (static_cast<int>(target_positions.size()) != Z) {
    throw ConfigError("target_positions has " + std::to_string(target_positions.size()) +
                      " entries, expected Z=" + std::to_string(Z));
  }
  if (static_cast<int>(power_budget.size()) != N) {
    throw ConfigError("power_budget needs one entry per BS");
  }
  for (double p : power_budget) {
    if (!(p > 0.0)) throw ConfigError("power budgets must be > 0");
  }
  if (!(noise_power > 0.0)) throw ConfigError("noise_power must be > 0");
  if (!(d_spacing > 0.0)) throw ConfigError("d_spacing must be > 0");
  if (!(wavelength > 0.0)) throw ConfigError("wavelength must be > 0");
  if (!(rcs_scale >= 0.0)) throw ConfigError("rcs_scale must be >= 0");
  if ((user_region.max - user_region.min).minCoeff() < 0.0) {
    throw ConfigError("user_region.max must be >= user_region.min componentwise");
  }
  if (channel.n_paths < 0) throw ConfigError("channel.n_paths must be >= 0");
  if (!(channel.ref_power > 0.0)) throw ConfigError("channel.ref_power must be > 0");
  for (int z = 0; z < Z; ++z) {
    for (int n = 0; n < N; ++n) {
      const Vec3 d = target_positions[z] - bs_positions[n];
      if (std::hypot(d.x(), d.y()) == 0.0) {
        throw DegenerateGeometry(
            "target " + std::to_string(z) + " lies on the vertical axis of BS " + std::to_string(n), n);
      }
    }
  }
}

ScenarioConfig ScenarioConfig::with_power(double watts) const {
  ScenarioConfig out = *this;
  out.power_budget.assign(N, watts);
  return out;
}

ScenarioConfig paper_scenario() {
  ScenarioConfig c;
  c.N = 3;
  c.K = 5;
  c.Z = 1;
  c.Lx = 4;
  c.Lz = 4;
  c.wavelength = 299792458.0 / 28e9;
  c.d_spacing = 0.5 * c.wavelength;
  c.bs_positions = {Vec3(236, 390, 6), Vec3(288, 390, 6), Vec3(236, 490, 6)};
  c.target_positions = {Vec3(244, 456, 22)};
  c.user_region = {Vec3(240, 400, 1.5), Vec3(290, 480, 1.5)};
  c.power_budget.assign(3, dbm_to_watts(20.0));
  c.noise_power = 1.0;
  c.rcs_scale = 1.0e6;
  return c;
}

ScenarioConfig smoke_scenario() {
  ScenarioConfig c = paper_scenario();
  c.N = 2;
  c.K = 2;
  c.Lx = 2;
  c.Lz = 2;
  c.bs_positions = {Vec3(236, 390, 6), Vec3(288, 390, 6)};
  c.power_budget.assign(2, dbm_to_watts(20.0));
  return c;
}

namespace {

Vec3 read_vec3(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() != 3) throw ConfigError(what + " must be a 3-element array");
  return Vec3(n[0].as<double>(), n[1].as<double>(), n[2].as<double>());
}

std::vector<Vec3> read_positions(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsSequence()) throw ConfigError(what + " must be a list of 3-element arrays");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    out.push_back(read_vec3(n[i], what + "[" + std::to_string(i) + "]"));
  }
  return out;
}

ScenarioConfig from_node(const YAML::Node& root) {
  const YAML::Node s = root["scenario"] ? root["scenario"] : root;
  ScenarioConfig c;
  c.bs_positions = read_positions(s["bs_positions"], "bs_positions");
  c.target_positions = read_positions(s["target_positions"], "target_positions");
  c.N = s["N"] ? s["N"].as<int>() : static_cast<int>(c.bs_positions.size());
  c.Z = s["Z"] ? s["Z"].as<int>() : static_cast<int>(c.target_positions.size());
  if (!s["K"]) throw ConfigError("missing key K");
  c.K = s["K"].as<int>();

  const YAML::Node arr = s["array"];
  if (!arr) throw ConfigError("missing section array");
  c.Lx = arr["Lx"].as<int>(1);
  c.Lz = arr["Lz"].as<int>(1);
  if (s["wavelength"]) {
    c.wavelength = s["wavelength"].as<double>();
  } else if (s["carrier_ghz"]) {
    c.wavelength = 299792458.0 / (s["carrier_ghz"].as<double>() * 1e9);
  } else {
    throw ConfigError("need wavelength or carrier_ghz");
  }
  if (arr["d_spacing"]) {
    c.d_spacing = arr["d_spacing"].as<double>();
  } else {
    c.d_spacing = arr["spacing_wavelengths"].as<double>(0.5) * c.wavelength;
  }

  const YAML::Node ur = s["user_region"];
  if (!ur) throw ConfigError("missing section user_region");
  c.user_region.min = read_vec3(ur["min"], "user_region.min");
  c.user_region.max = read_vec3(ur["max"], "user_region.max");

  if (s["power_budget"]) {
    const YAML::Node pb = s["power_budget"];
    if (pb.IsScalar()) {
      c.power_budget.assign(c.N, pb.as<double>());
    } else {
      c.power_budget = pb.as<std::vector<double>>();
    }
  } else if (s["power_budget_dbm"]) {
    const YAML::Node pb = s["power_budget_dbm"];
    std::vector<double> dbm =
        pb.IsScalar() ? std::vector<double>(c.N, pb.as<double>()) : pb.as<std::vector<double>>();
    for (double v : dbm) c.power_budget.push_back(dbm_to_watts(v));
  } else {
    throw ConfigError("need power_budget (W) or power_budget_dbm");
  }
  c.noise_power = s["noise_power"].as<double>(1.0);
  c.rcs_scale = s["rcs_scale"].as<double>(1.0);

  if (const YAML::Node ch = root["channel"]) {
    c.channel.n_paths = ch["n_paths"].as<int>(c.channel.n_paths);
    c.channel.scatter_power = ch["scatter_power"].as<double>(c.channel.scatter_power);
    c.channel.ref_snr_db = ch["ref_snr_db"].as<double>(c.channel.ref_snr_db);
    if (ch["ref_power_dbm"]) c.channel.ref_power = dbm_to_watts(ch["ref_power_dbm"].as<double>());
    c.channel.ref_power = ch["ref_power"].as<double>(c.channel.ref_power);
  }
  c.validate();
  return c;
}

YAML::Node vec_node(const Vec3& v) {
  YAML::Node n;
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (int i = 0; i < 3; ++i) n.push_back(v[i]);
  return n;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& yaml_text) {
  try {
    return from_node(YAML::Load(yaml_text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed scenario config: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_yaml(const ScenarioConfig& c) {
  YAML::Node root;
  YAML::Node s;
  s["N"] = c.N;
  s["K"] = c.K;
  s["Z"] = c.Z;
  s["array"]["Lx"] = c.Lx;
  s["array"]["Lz"] = c.Lz;
  s["array"]["d_spacing"] = c.d_spacing;
  s["wavelength"] = c.wavelength;
  for (const auto& b : c.bs_positions) s["bs_positions"].push_back(vec_node(b));
  for (const auto& t : c.target_positions) s["target_positions"].push_back(vec_node(t));
  s["user_region"]["min"] = vec_node(c.user_region.min);
  s["user_region"]["max"] = vec_node(c.user_region.max);
  s["power_budget"] = c.power_budget;
  s["noise_power"] = c.noise_power;
  s["rcs_scale"] = c.rcs_scale;
  root["scenario"] = s;
  root["channel"]["n_paths"] = c.channel.n_paths;
  root["channel"]["scatter_power"] = c.channel.scatter_power;
  root["channel"]["ref_snr_db"] = c.channel.ref_snr_db;
  root["channel"]["ref_power"] = c.channel.ref_power;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return out.c_str();
}

TargetAngles target_angles(const Vec3& bs, const Vec3& tgt) {
  const Vec3 d = tgt - bs;
  TargetAngles a;
  a.dist = d.norm();
  a.dist_xy = std::hypot(d.x(), d.y());
  if (a.dist == 0.0) throw DegenerateGeometry("target coincides with BS");
  if (a.dist_xy == 0.0) throw DegenerateGeometry("azimuth undefined: target on BS vertical axis");
  a.theta = std::asin(std::clamp(d.z() / a.dist, -1.0, 1.0));
  a.beta = std::atan(d.y() / d.x()) + (tgt.x() < bs.x() ? kPi : 0.0);
  if (a.beta > kPi) a.beta -= 2.0 * kPi;
  if (a.beta <= -kPi) a.beta += 2.0 * kPi;
  return a;
}

AngleRows angle_jacobian(const Vec3& bs, const Vec3& tgt) {
  const Vec3 d = tgt - bs;
  const double dxy2 = d.x() * d.x() + d.y() * d.y();
  if (dxy2 == 0.0) throw DegenerateGeometry("angle Jacobian undefined: target on BS vertical axis");
  const double dxy = std::sqrt(dxy2);
  const double dn2 = dxy2 + d.z() * d.z();
  AngleRows r;
  r.dtheta_dt = Vec3(-d.x() * d.z() / (dn2 * dxy), -d.y() * d.z() / (dn2 * dxy), dxy2 / (dn2 * dxy));
  r.dbeta_dt = Vec3((bs.y() - tgt.y()) / dxy2, (tgt.x() - bs.x()) / dxy2, 0.0);
  return r;
}

AngleSet angle_set(const std::vector<Vec3>& bs_positions, const Vec3& tgt) {
  AngleSet s;
  for (std::size_t n = 0; n < bs_positions.size(); ++n) {
    TargetAngles a;
    try {
      a = target_angles(bs_positions[n], tgt);
    } catch (const DegenerateGeometry& e) {
      throw DegenerateGeometry(std::string(e.what()) + " (BS " + std::to_string(n) + ")",
                               static_cast<int>(n));
    }
    s.theta.push_back(a.theta);
    s.beta.push_back(a.beta);
    s.dist.push_back(a.dist);
    s.dist_xy.push_back(a.dist_xy);
  }
  return s;
}

PositionJacobian position_jacobian(const std::vector<Vec3>& bs_positions, const Vec3& tgt) {
  const int n_bs = static_cast<int>(bs_positions.size());
  PositionJacobian pj;
  pj.Q.resize(2 * n_bs, 3);
  for (int n = 0; n < n_bs; ++n) {
    AngleRows r;
    try {
      r = angle_jacobian(bs_positions[n], tgt);
    } catch (const DegenerateGeometry& e) {
      throw DegenerateGeometry(std::string(e.what()) + " (BS " + std::to_string(n) + ")", n);
    }
    pj.Q.row(n) = r.dtheta_dt.transpose();
    pj.Q.row(n_bs + n) = r.dbeta_dt.transpose();
  }
  return pj;
}

PositionJacobian position_jacobian(const ScenarioConfig& cfg, int target_index) {
  return position_jacobian(cfg.bs_positions, cfg.target_positions.at(target_index));
}

}  // namespace coisac
