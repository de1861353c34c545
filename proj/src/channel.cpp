// SPDX-License-Identifier: Apache-2.0
#include "coisac/channel.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "coisac/binary_io.hpp"
#include "coisac/rng.hpp"

namespace coisac {

CVec upa_steering(double theta, double beta, int Lx, int Lz, double d_spacing, double wavelength) {
  if (Lx < 1 || Lz < 1) throw DimensionError("UPA dimensions must be >= 1");
  const int L = Lx * Lz;
  const double k = 2.0 * kPi / wavelength * d_spacing;
  const double ux = std::cos(beta) * std::cos(theta);
  const double uz = std::sin(theta);
  const double amp = 1.0 / std::sqrt(static_cast<double>(L));
  CVec a(L);
  for (int ix = 0; ix < Lx; ++ix) {
    for (int iz = 0; iz < Lz; ++iz) {
      a[ix * Lz + iz] = std::polar(amp, k * (ix * ux + iz * uz));
    }
  }
  return a;
}

SteeringDerivatives upa_steering_derivatives(double theta, double beta, int Lx, int Lz,
                                             double d_spacing, double wavelength) {
  SteeringDerivatives s;
  s.a = upa_steering(theta, beta, Lx, Lz, d_spacing, wavelength);
  const int L = Lx * Lz;
  const double k = 2.0 * kPi / wavelength * d_spacing;
  const double dux_dtheta = -std::cos(beta) * std::sin(theta);
  const double duz_dtheta = std::cos(theta);
  const double dux_dbeta = -std::sin(beta) * std::cos(theta);
  s.da_dtheta.resize(L);
  s.da_dbeta.resize(L);
  const cplx j(0.0, 1.0);
  for (int ix = 0; ix < Lx; ++ix) {
    for (int iz = 0; iz < Lz; ++iz) {
      const int i = ix * Lz + iz;
      s.da_dtheta[i] = j * k * (ix * dux_dtheta + iz * duz_dtheta) * s.a[i];
      s.da_dbeta[i] = j * k * (ix * dux_dbeta) * s.a[i];
    }
  }
  return s;
}

namespace {

Vec3 uniform_in_box(const Box& box, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec3 p;
  for (int i = 0; i < 3; ++i) p[i] = box.min[i] + u(rng) * (box.max[i] - box.min[i]);
  return p;
}

// Deterministic per config: mean of 1/d^2 over users in the region and all BSs.
double mean_inverse_sq_distance(const ScenarioConfig& cfg) {
  Rng rng = make_rng(0, Stream::kCalibration, 0);
  constexpr int kDraws = 4096;
  double acc = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const Vec3 u = uniform_in_box(cfg.user_region, rng);
    for (const Vec3& b : cfg.bs_positions) {
      const double d2 = (u - b).squaredNorm();
      acc += d2 > 0.0 ? 1.0 / d2 : 0.0;
    }
  }
  return acc / (kDraws * static_cast<double>(cfg.N));
}

}  // namespace

double channel_gain_scale(const ScenarioConfig& cfg) {
  const double fs = cfg.wavelength / (4.0 * kPi);
  const double mean_path = fs * fs * mean_inverse_sq_distance(cfg);
  const double target_norm2 =
      std::pow(10.0, cfg.channel.ref_snr_db / 10.0) * cfg.noise_power / cfg.channel.ref_power;
  const double multipath = 1.0 + cfg.channel.n_paths * cfg.channel.scatter_power;
  return std::sqrt(target_norm2 / (cfg.L() * mean_path * multipath));
}

void refresh_angles(ChannelSample& sample, const ScenarioConfig& cfg) {
  sample.angles.clear();
  for (const Vec3& t : sample.target_pos) sample.angles.push_back(angle_set(cfg.bs_positions, t));
}

ChannelSample synth_sample(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t index) {
  const double gain = channel_gain_scale(cfg);
  const int L = cfg.L();
  const double sqrtL = std::sqrt(static_cast<double>(L));
  const double k_wave = 2.0 * kPi / cfg.wavelength;

  ChannelSample s;
  s.sample_id = index;
  s.rng_seed = derive_seed(seed, Stream::kSampleGen, index);
  Rng rng(s.rng_seed);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> uelev(-kPi / 4.0, kPi / 4.0);
  std::uniform_real_distribution<double> uazim(-kPi, kPi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  s.H.resize(cfg.NL(), cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    const Vec3 user = uniform_in_box(cfg.user_region, rng);
    for (int n = 0; n < cfg.N; ++n) {
      TargetAngles ang;
      try {
        ang = target_angles(cfg.bs_positions[n], user);
      } catch (const DegenerateGeometry& e) {
        throw DegenerateGeometry("sampled user " + std::to_string(k) + " degenerate w.r.t. BS " +
                                     std::to_string(n) + ": " + e.what(),
                                 n);
      }
      const double path = cfg.wavelength / (4.0 * kPi * ang.dist);
      CVec h = std::polar(gain * path * sqrtL, -k_wave * ang.dist) *
               upa_steering(cfg, ang.theta, ang.beta);
      const double scatter_sd = gain * path * sqrtL * std::sqrt(cfg.channel.scatter_power / 2.0);
      for (int p = 0; p < cfg.channel.n_paths; ++p) {
        const double th = uelev(rng);
        const double be = uazim(rng);
        const cplx g(scatter_sd * gauss(rng), scatter_sd * gauss(rng));
        h += g * upa_steering(cfg, th, be);
      }
      for (int l = 0; l < L; ++l) {
        // float-exact so the dataset file round-trips bit for bit
        h[l] = cplx(static_cast<float>(h[l].real()), static_cast<float>(h[l].imag()));
      }
      s.H.block(n * L, k, L, 1) = h;
    }
  }

  s.target_pos = cfg.target_positions;
  for (int z = 0; z < cfg.Z; ++z) {
    CMat a(cfg.N, cfg.N);
    std::vector<double> dist(cfg.N);
    for (int n = 0; n < cfg.N; ++n) dist[n] = (s.target_pos[z] - cfg.bs_positions[n]).norm();
    for (int m = 0; m < cfg.N; ++m) {
      for (int n = 0; n < cfg.N; ++n) {
        a(m, n) = (cfg.rcs_scale / (dist[m] * dist[n])) * std::polar(1.0, uphase(rng));
      }
    }
    s.alphas.push_back(std::move(a));
  }
  refresh_angles(s, cfg);
  return s;
}

std::vector<ChannelSample> synth_channels(const ScenarioConfig& cfg, std::size_t n_samples,
                                          std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  cfg.validate();
  std::vector<ChannelSample> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) out.push_back(synth_sample(cfg, seed, i));
  return out;
}

void PerturbationSpec::validate() const {
  if (std::isnan(csi_snr_db)) throw ConfigError("csi_snr_db must not be NaN");
  if (pos_err) {
    if (!(pos_err->lo >= 0.0) || !(pos_err->hi > pos_err->lo)) {
      throw ConfigError("position error range must satisfy 0 <= lo < hi");
    }
  }
}

ChannelSample perturb(const ChannelSample& sample, const PerturbationSpec& spec,
                      const ScenarioConfig& cfg) {
  spec.validate();
  ChannelSample out = sample;
  Rng rng = make_rng(spec.seed, Stream::kPerturb, sample.sample_id);

  if (std::isfinite(spec.csi_snr_db)) {
    const double entries = static_cast<double>(sample.H.size());
    const double var = sample.H.squaredNorm() / entries * std::pow(10.0, -spec.csi_snr_db / 10.0);
    std::normal_distribution<double> g(0.0, std::sqrt(var / 2.0));
    for (Eigen::Index c = 0; c < out.H.cols(); ++c) {
      for (Eigen::Index r = 0; r < out.H.rows(); ++r) {
        const double re = g(rng);
        const double im = g(rng);
        out.H(r, c) += cplx(re, im);
      }
    }
  }

  if (spec.pos_err) {
    std::uniform_real_distribution<double> mag(spec.pos_err->lo, spec.pos_err->hi);
    std::bernoulli_distribution sign(0.5);
    for (std::size_t z = 0; z < out.target_pos.size(); ++z) {
      bool placed = false;
      for (int attempt = 0; attempt < 2 && !placed; ++attempt) {
        Vec3 t = sample.target_pos[z];
        for (int i = 0; i < 3; ++i) {
          double m = mag(rng);
          // uniform_real_distribution may return hi through rounding
          if (m >= spec.pos_err->hi) m = std::nextafter(spec.pos_err->hi, spec.pos_err->lo);
          t[i] += sign(rng) ? m : -m;
        }
        try {
          out.angles.at(z) = angle_set(cfg.bs_positions, t);
          out.target_pos[z] = t;
          placed = true;
        } catch (const DegenerateGeometry&) {
          if (attempt == 1) throw;
        }
      }
    }
  }
  return out;
}

// ---- dataset I/O ----

namespace {

constexpr char kMagic[4] = {'C', 'I', 'S', 'D'};

void check_header(const DatasetHeader& h, const ScenarioConfig& cfg) {
  if (h.N != static_cast<std::uint32_t>(cfg.N) || h.K != static_cast<std::uint32_t>(cfg.K) ||
      h.Z != static_cast<std::uint32_t>(cfg.Z) || h.L != static_cast<std::uint32_t>(cfg.L()) ||
      h.Lx != static_cast<std::uint32_t>(cfg.Lx) || h.Lz != static_cast<std::uint32_t>(cfg.Lz)) {
    throw DimensionError("dataset header (N=" + std::to_string(h.N) + ", K=" + std::to_string(h.K) +
                         ", Z=" + std::to_string(h.Z) + ", L=" + std::to_string(h.L) +
                         ") conflicts with config (N=" + std::to_string(cfg.N) +
                         ", K=" + std::to_string(cfg.K) + ", Z=" + std::to_string(cfg.Z) +
                         ", L=" + std::to_string(cfg.L()) + ")");
  }
}

DatasetHeader read_header(io::Reader& r) {
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a CISD dataset (bad magic)");
  DatasetHeader h;
  h.version = r.get<std::uint16_t>();
  if (h.version != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(h.version));
  }
  h.N = r.get<std::uint32_t>();
  h.K = r.get<std::uint32_t>();
  h.Z = r.get<std::uint32_t>();
  h.L = r.get<std::uint32_t>();
  h.Lx = r.get<std::uint32_t>();
  h.Lz = r.get<std::uint32_t>();
  h.n_samples = r.get<std::uint32_t>();
  h.wavelength = r.get<double>();
  h.d_spacing = r.get<double>();
  if (h.L != h.Lx * h.Lz) throw FormatError("dataset header has L != Lx*Lz");
  return h;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const ScenarioConfig& cfg,
                  const std::vector<ChannelSample>& samples) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  io::Writer w(os);
  w.raw(kMagic, 4);
  w.put<std::uint16_t>(kDatasetVersion);
  for (int v : {cfg.N, cfg.K, cfg.Z, cfg.L(), cfg.Lx, cfg.Lz}) w.put<std::uint32_t>(v);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(samples.size()));
  w.put<double>(cfg.wavelength);
  w.put<double>(cfg.d_spacing);
  for (const ChannelSample& s : samples) {
    if (s.H.rows() != cfg.NL() || s.H.cols() != cfg.K ||
        static_cast<int>(s.target_pos.size()) != cfg.Z ||
        static_cast<int>(s.alphas.size()) != cfg.Z) {
      throw DimensionError("sample " + std::to_string(s.sample_id) + " does not match config");
    }
    for (Eigen::Index k = 0; k < s.H.cols(); ++k) {
      for (Eigen::Index r = 0; r < s.H.rows(); ++r) {
        w.put<float>(static_cast<float>(s.H(r, k).real()));
        w.put<float>(static_cast<float>(s.H(r, k).imag()));
      }
    }
    for (const Vec3& t : s.target_pos) {
      for (int i = 0; i < 3; ++i) w.put<double>(t[i]);
    }
    for (const CMat& a : s.alphas) {
      for (int m = 0; m < cfg.N; ++m) {
        for (int n = 0; n < cfg.N; ++n) {
          w.put<double>(a(m, n).real());
          w.put<double>(a(m, n).imag());
        }
      }
    }
  }
  if (!w.ok()) throw Error("write failed for " + path.string());
}

DatasetHeader read_dataset_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact("dataset not found: " + path.string());
  io::Reader r(is);
  return read_header(r);
}

std::vector<ChannelSample> load_dataset(const std::filesystem::path& path,
                                        const ScenarioConfig& cfg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact("dataset not found: " + path.string());
  io::Reader r(is);
  const DatasetHeader h = read_header(r);
  check_header(h, cfg);
  std::vector<ChannelSample> out;
  out.reserve(h.n_samples);
  for (std::uint32_t i = 0; i < h.n_samples; ++i) {
    ChannelSample s;
    s.sample_id = i;
    s.H.resize(cfg.NL(), cfg.K);
    for (Eigen::Index k = 0; k < s.H.cols(); ++k) {
      for (Eigen::Index row = 0; row < s.H.rows(); ++row) {
        const float re = r.get<float>();
        const float im = r.get<float>();
        s.H(row, k) = cplx(re, im);
      }
    }
    for (int z = 0; z < cfg.Z; ++z) {
      Vec3 t;
      for (int c = 0; c < 3; ++c) t[c] = r.get<double>();
      s.target_pos.push_back(t);
    }
    for (int z = 0; z < cfg.Z; ++z) {
      CMat a(cfg.N, cfg.N);
      for (int m = 0; m < cfg.N; ++m) {
        for (int n = 0; n < cfg.N; ++n) {
          const double re = r.get<double>();
          const double im = r.get<double>();
          a(m, n) = cplx(re, im);
        }
      }
      s.alphas.push_back(std::move(a));
    }
    refresh_angles(s, cfg);
    out.push_back(std::move(s));
  }
  if (!r.at_eof()) throw FormatError("trailing bytes after last sample");
  return out;
}

}  // namespace coisac
