// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "coisac/channel.hpp"
#include "fixtures.hpp"

using namespace coisac;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "coisac_unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Steering, SingleAntenna) {
  const CVec a = upa_steering(0.3, -1.2, 1, 1, 0.005, 0.01);
  ASSERT_EQ(a.size(), 1);
  EXPECT_NEAR(std::abs(a[0] - cplx(1, 0)), 0.0, 1e-15);
}

TEST(Steering, BroadsideIsAllOnes) {
  const CVec a = upa_steering(0.0, kPi / 2, 4, 4, 0.005, 0.01);
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(std::abs(a[i] - cplx(0.25, 0)), 0.0, 1e-15);
}

TEST(Steering, HandEvaluatedEntry) {
  const double lambda = 0.01;
  const CVec a = upa_steering(kPi / 6, 0.0, 2, 2, lambda / 2, lambda);
  // antenna (ix=1, iz=0) sits at flat index 1 * Lz + 0 = 2
  const cplx expected = 0.5 * std::exp(cplx(0, kPi * std::cos(kPi / 6)));
  EXPECT_NEAR(std::abs(a[2] - expected), 0.0, 1e-14);
  EXPECT_NEAR(std::arg(a[2]), 2.7207, 1e-4);
  // (ix=0, iz=1): phase pi * sin(pi/6)
  EXPECT_NEAR(std::abs(a[1] - 0.5 * std::exp(cplx(0, kPi * 0.5))), 0.0, 1e-14);
}

TEST(Steering, UnitModulusEntriesAndNorm) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int t = 0; t < 50; ++t) {
    const CVec a = upa_steering(u(rng) / 2, u(rng), 3, 5, 0.004, 0.0107);
    for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_NEAR(std::abs(a[i]), 1 / std::sqrt(15.0), 1e-15);
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  }
}

TEST(Steering, DerivativesMatchCentralDifferences) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  const double h = 1e-6;
  for (int t = 0; t < 20; ++t) {
    const double th = u(rng), be = 2 * u(rng);
    const auto s = upa_steering_derivatives(th, be, 4, 3, 0.00535, 0.0107);
    const CVec fd_t = (upa_steering(th + h, be, 4, 3, 0.00535, 0.0107) -
                       upa_steering(th - h, be, 4, 3, 0.00535, 0.0107)) / (2 * h);
    const CVec fd_b = (upa_steering(th, be + h, 4, 3, 0.00535, 0.0107) -
                       upa_steering(th, be - h, 4, 3, 0.00535, 0.0107)) / (2 * h);
    EXPECT_LT((fd_t - s.da_dtheta).norm(), 1e-6 * std::max(1.0, s.da_dtheta.norm()));
    EXPECT_LT((fd_b - s.da_dbeta).norm(), 1e-6 * std::max(1.0, s.da_dbeta.norm()));
  }
}

TEST(SynthChannels, ShapesAndDeterminism) {
  const auto cfg = paper_scenario();
  const auto a = synth_channels(cfg, 8, 42);
  const auto b = synth_channels(cfg, 8, 42);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].H.rows(), 48);
    EXPECT_EQ(a[i].H.cols(), 5);
    EXPECT_EQ(a[i].sample_id, i);
    EXPECT_TRUE(a[i].H == b[i].H);
    EXPECT_TRUE(a[i].alphas[0] == b[i].alphas[0]);
    EXPECT_TRUE(a[i].H.allFinite());
    for (Eigen::Index j = 0; j < a[i].H.size(); ++j) {
      const cplx v = a[i].H(j);
      EXPECT_EQ(v.real(), static_cast<double>(static_cast<float>(v.real())));
    }
  }
  const auto c = synth_channels(cfg, 2, 43);
  EXPECT_FALSE(a[0].H == c[0].H);
  EXPECT_THROW(synth_channels(cfg, 0, 1), ConfigError);
}

TEST(SynthChannels, FullTrainingSetSize) {
  auto cfg = paper_scenario();
  cfg.channel.n_paths = 0;
  EXPECT_EQ(synth_channels(cfg, 4000, 1).size(), 4000u);
}

TEST(SynthChannels, ReflectionModel) {
  auto cfg = coisac::testing::small_config(3, 2, 2, 2);
  const auto s1 = synth_sample(cfg, 5, 0);
  cfg.rcs_scale *= 2;
  const auto s2 = synth_sample(cfg, 5, 0);
  for (int m = 0; m < 3; ++m) {
    for (int n = 0; n < 3; ++n) {
      EXPECT_EQ(std::abs(s2.alphas[0](m, n)), 2 * std::abs(s1.alphas[0](m, n)));
      const double dm = s1.angles[0].dist[m], dn = s1.angles[0].dist[n];
      EXPECT_NEAR(std::abs(s1.alphas[0](m, n)), cfg.rcs_scale / 2 / (dm * dn), 1e-12);
    }
  }
}

TEST(SynthChannels, ReferenceSnrCalibration) {
  const auto cfg = paper_scenario();
  const auto s = synth_channels(cfg, 400, 3);
  double acc = 0.0;
  int links = 0;
  for (const auto& x : s) {
    for (int k = 0; k < cfg.K; ++k) {
      for (int n = 0; n < cfg.N; ++n) {
        acc += x.H.block(n * cfg.L(), k, cfg.L(), 1).squaredNorm();
        ++links;
      }
    }
  }
  const double snr_db =
      10 * std::log10(acc / links * cfg.channel.ref_power / cfg.noise_power);
  EXPECT_NEAR(snr_db, cfg.channel.ref_snr_db, 0.5);
}

TEST(Perturb, PositionErrorMagnitudes) {
  const auto cfg = paper_scenario();
  const auto s = synth_sample(cfg, 1, 0);
  PerturbationSpec spec;
  spec.pos_err = PerturbationSpec::Range{2.0, 3.0};
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    spec.seed = seed;
    const auto p = perturb(s, spec, cfg);
    for (int c = 0; c < 3; ++c) {
      const double e = std::abs(p.target_pos[0][c] - s.target_pos[0][c]);
      EXPECT_GE(e, 2.0 - 1e-12);
      EXPECT_LT(e, 3.0 + 1e-12);
    }
    const auto expect = angle_set(cfg.bs_positions, p.target_pos[0]);
    EXPECT_EQ(p.angles[0].theta, expect.theta);
    EXPECT_TRUE(p.H == s.H);
  }
}

TEST(Perturb, CsiNoiseCalibration) {
  const auto cfg = paper_scenario();
  const auto s = synth_sample(cfg, 1, 0);
  PerturbationSpec spec;
  spec.csi_snr_db = 0.0;
  double noise = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    spec.seed = static_cast<std::uint64_t>(i);
    noise += (perturb(s, spec, cfg).H - s.H).squaredNorm();
  }
  EXPECT_NEAR(noise / (draws * s.H.squaredNorm()), 1.0, 0.05);
}

TEST(Perturb, DeterministicAndNonMutating) {
  const auto cfg = paper_scenario();
  const auto s = synth_sample(cfg, 1, 3);
  const auto before = s;
  PerturbationSpec spec;
  spec.csi_snr_db = 10.0;
  spec.pos_err = PerturbationSpec::Range{0.5, 1.0};
  spec.seed = 99;
  const auto a = perturb(s, spec, cfg);
  const auto b = perturb(s, spec, cfg);
  EXPECT_TRUE(a.H == b.H);
  EXPECT_EQ(a.target_pos[0], b.target_pos[0]);
  EXPECT_TRUE(s.H == before.H);
  EXPECT_EQ(s.target_pos[0], before.target_pos[0]);
  EXPECT_FALSE(a.H == s.H);
}

TEST(Perturb, InvalidSpec) {
  const auto cfg = paper_scenario();
  const auto s = synth_sample(cfg, 1, 0);
  PerturbationSpec spec;
  spec.pos_err = PerturbationSpec::Range{0.0, 0.0};
  EXPECT_THROW(perturb(s, spec, cfg), ConfigError);
  spec.pos_err = PerturbationSpec::Range{-1.0, 1.0};
  EXPECT_THROW(perturb(s, spec, cfg), ConfigError);
}

TEST(Dataset, RoundTripIsBitExact) {
  const auto cfg = paper_scenario();
  const auto samples = synth_channels(cfg, 6, 77);
  const auto path = temp_file("roundtrip.cisd");
  save_dataset(path, cfg, samples);
  const auto h = read_dataset_header(path);
  EXPECT_EQ(h.N, 3u);
  EXPECT_EQ(h.K, 5u);
  EXPECT_EQ(h.L, 16u);
  EXPECT_EQ(h.n_samples, 6u);
  const auto back = load_dataset(path, cfg);
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_TRUE(back[i].H == samples[i].H);
    EXPECT_EQ(back[i].target_pos[0], samples[i].target_pos[0]);
    EXPECT_TRUE(back[i].alphas[0] == samples[i].alphas[0]);
    EXPECT_EQ(back[i].angles[0].beta, samples[i].angles[0].beta);
  }
}

TEST(Dataset, CorruptFilesAreRejected) {
  const auto cfg = coisac::testing::small_config(2, 2, 2, 2);
  const auto samples = synth_channels(cfg, 3, 1);
  const auto path = temp_file("trunc.cisd");
  save_dataset(path, cfg, samples);
  fs::resize_file(path, fs::file_size(path) - 5);
  EXPECT_THROW(load_dataset(path, cfg), FormatError);

  save_dataset(path, cfg, samples);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(load_dataset(path, cfg), FormatError);

  save_dataset(path, cfg, samples);
  auto other = cfg;
  other.K = 3;
  EXPECT_THROW(load_dataset(path, other), DimensionError);
  EXPECT_THROW(load_dataset(temp_file("missing.cisd"), cfg), MissingArtifact);
}
