// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "coisac/baselines.hpp"
#include "coisac/training.hpp"
#include "fixtures.hpp"
#include "model_helpers.hpp"

namespace coisac {
namespace {

using testing::small_config;

// Independent evaluation of one sample's loss: SINR by explicit sums and
// SPEB by a direct inverse of the jittered 3x3 matrix.
double loop_sample_loss(const CMat& P, const ChannelSample& s, const ScenarioConfig& cfg,
                        double gamma, double r_min, double rho1, double rho2) {
  const int K = cfg.K, Z = cfg.Z;
  double sum = 0.0, hinge = 0.0;
  for (int k = 0; k < K; ++k) {
    double sig = 0.0, intf = 0.0;
    for (int c = 0; c < P.cols(); ++c) {
      cplx acc = 0.0;
      for (int r = 0; r < P.rows(); ++r) acc += std::conj(s.H(r, k)) * P(r, c);
      (c == Z + k ? sig : intf) += std::norm(acc);
    }
    const double R = std::log2(1.0 + sig / (intf + cfg.noise_power));
    sum += R;
    hinge += std::max(0.0, r_min - R);
  }
  const SensingOperators ops = build_operators(s, cfg);
  const RMat Q = position_jacobian(cfg.bs_positions, s.target_pos[0]).Q;
  const RMat J = Q.transpose() * efim(P, ops, cfg.noise_power) * Q;
  const RMat Jr = J + kSpebJitter * J.trace() / 3.0 * RMat::Identity(3, 3);
  const double sp = Jr.inverse().trace();
  return -sum + rho1 * std::max(0.0, sp - gamma) + rho2 * hinge;
}

TEST(Penalty, Schedule) {
  TrainConfig tc;
  EXPECT_DOUBLE_EQ(penalty_schedule(800, tc).rho1, 640.0);
  EXPECT_DOUBLE_EQ(penalty_schedule(800, tc).rho2, 400.0);
  EXPECT_DOUBLE_EQ(penalty_schedule(1, tc).rho1, 0.8);
  EXPECT_DOUBLE_EQ(penalty_schedule(1, tc).rho2, 0.5);
  tc.rho1_slope = tc.rho2_slope = 0.0;
  EXPECT_EQ(penalty_schedule(50, tc).rho1, 0.0);
  EXPECT_EQ(penalty_schedule(50, tc).rho2, 0.0);
}

TEST(TrainConfig, Validation) {
  TrainConfig tc;
  EXPECT_THROW(tc.validate(), ConfigError);  // gamma unset
  tc.gamma = 1.0;
  EXPECT_NO_THROW(tc.validate());
  tc.epochs = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc.epochs = 1;
  tc.r_min = -1;
  EXPECT_THROW(tc.validate(), ConfigError);
}

class LossTest : public ::testing::Test {
 protected:
  ScenarioConfig cfg = small_config(2, 2, 2, 2);
  std::vector<ChannelSample> s = {synth_sample(cfg, 3, 0), synth_sample(cfg, 3, 1)};
  std::vector<BeamformingMatrix> P;
  ProjectorCache cache;
  void SetUp() override {
    std::mt19937_64 rng(4);
    P = {testing::random_beams(cfg, rng, 0.2), testing::random_beams(cfg, rng, 0.2)};
  }
  std::vector<const ChannelSample*> ptrs() const { return {&s[0], &s[1]}; }
};

TEST_F(LossTest, NoViolationsGivesNegativeMeanRate) {
  const LossContext ctx{&cfg, 1e30, 0.0, &cache};
  const BatchLoss b = loss(P, ptrs(), ctx, {5.0, 5.0});
  const double mean = 0.5 * (sum_rate(s[0].H, P[0], 1.0) + sum_rate(s[1].H, P[1], 1.0));
  EXPECT_EQ(b.total, -mean);
  EXPECT_EQ(b.mean_sum_rate, mean);
  EXPECT_EQ(b.viol_speb_frac, 0.0);
  EXPECT_EQ(b.viol_rate_frac, 0.0);
}

TEST_F(LossTest, SpebHingeAddsRhoDelta) {
  const BatchLoss base = loss({P[0]}, {&s[0]}, {&cfg, 1e30, 0.0, &cache}, {3.0, 0.0});
  const double sp = base.mean_speb, delta = 0.25 * sp;
  const BatchLoss b = loss({P[0]}, {&s[0]}, {&cfg, sp - delta, 0.0, &cache}, {3.0, 0.0});
  EXPECT_NEAR(b.total - base.total, 3.0 * delta, 1e-12 * std::abs(b.total));
  EXPECT_EQ(b.viol_speb_frac, 1.0);
}

TEST_F(LossTest, MatchesLoopOracle) {
  const LossContext probe{&cfg, 1e30, 0.0, &cache};
  const double gamma = 0.7 * loss(P, ptrs(), probe, {}).mean_speb;
  const double r_min = 0.8 * loss(P, ptrs(), probe, {}).mean_sum_rate / cfg.K;
  const LossContext ctx{&cfg, gamma, r_min, &cache};
  const BatchLoss b = loss(P, ptrs(), ctx, {1.3, 2.1});
  const double ref = 0.5 * (loop_sample_loss(P[0].P, s[0], cfg, gamma, r_min, 1.3, 2.1) +
                            loop_sample_loss(P[1].P, s[1], cfg, gamma, r_min, 1.3, 2.1));
  EXPECT_LT(testing::rel_err(b.total, ref), 1e-10);
}

TEST_F(LossTest, SampleGradientMatchesFiniteDifferences) {
  const LossContext probe{&cfg, 1e30, 0.0, &cache};
  const SampleLoss v0 = sample_loss(P[0], s[0], probe);
  const double gamma = 0.8 * v0.speb[0];
  const double r_min = std::max(v0.rates[0], v0.rates[1]) * 0.999;
  const LossContext ctx{&cfg, gamma, r_min, &cache};
  const Penalty rho{1.5, 2.5};
  const SampleLoss v = sample_loss(P[0], s[0], ctx);
  const CMat g = sample_loss_gradient(P[0], s[0], ctx, rho, v);
  auto f = [&](const BeamformingMatrix& q) {
    return loss({q}, {&s[0]}, ctx, rho).total;
  };
  const double h = 1e-7;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    for (int part = 0; part < 2; ++part) {
      const cplx d = part ? cplx(0, h) : cplx(h, 0);
      BeamformingMatrix a = P[0], b = P[0];
      a.P.data()[i] += d;
      b.P.data()[i] -= d;
      const double fd = (f(a) - f(b)) / (2 * h);
      const double an = part ? g.data()[i].imag() : g.data()[i].real();
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3}));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(LossGradient, ParameterSubsetMatchesFiniteDifferences) {
  const ScenarioConfig cfg = small_config(2, 2, 2, 2);
  ModelConfig mc;
  mc.widths = smoke_widths(cfg.L());
  auto m = make_model(mc, cfg, 5);
  std::vector<ChannelSample> data = {synth_sample(cfg, 1, 0), synth_sample(cfg, 1, 1)};
  ProjectorCache cache;
  const LossContext probe{&cfg, 1e30, 0.0, &cache};
  const double gamma = 0.5 * loss({m->forward(data[0]), m->forward(data[1])},
                                  {&data[0], &data[1]}, probe, {}).mean_speb;
  const LossContext ctx{&cfg, gamma, 0.05, &cache};
  const Penalty rho{0.8, 0.5};
  auto total = [&] {
    return loss({m->forward(data[0]), m->forward(data[1])}, {&data[0], &data[1]}, ctx, rho).total;
  };
  m->params().zero_grad();
  for (const auto& s : data) {
    std::unique_ptr<Tape> tape;
    const BeamformingMatrix P = m->forward(s, &tape);
    const SampleLoss v = sample_loss(P, s, ctx);
    m->backward(*tape, sample_loss_gradient(P, s, ctx, rho, v) * 0.5);
  }
  std::mt19937_64 rng(9);
  auto& ts = m->params().tensors();
  for (int c = 0; c < 10; ++c) {
    auto& t = ts[std::uniform_int_distribution<std::size_t>(0, ts.size() - 1)(rng)];
    const Eigen::Index i = std::uniform_int_distribution<Eigen::Index>(0, t.value.size() - 1)(rng);
    const double w = t.value[i], h = 1e-4 * std::max(1.0, std::abs(w));
    t.value[i] = w + h;
    const double fp = total();
    t.value[i] = w - h;
    const double fm = total();
    t.value[i] = w;
    const double fd = (fp - fm) / (2 * h);
    EXPECT_LT(std::abs(fd - t.grad[i]) / std::max({std::abs(fd), std::abs(t.grad[i]), 1e-4}), 1e-3)
        << t.name << "[" << i << "]";
  }
}

TEST(DefaultGamma, HomogeneousInPower) {
  ScenarioConfig cfg = smoke_scenario();
  const auto calib = synth_channels(cfg, 17, 5);
  const double g1 = default_gamma(cfg, calib);
  EXPECT_GT(g1, 0.0);
  EXPECT_EQ(g1, default_gamma(cfg, calib));
  for (auto& p : cfg.power_budget) p *= 2.0;
  EXPECT_LT(testing::rel_err(default_gamma(cfg, calib), 0.5 * g1), 1e-9);
  EXPECT_THROW(default_gamma(cfg, std::vector<ChannelSample>(calib.begin(), calib.begin() + 15)),
               ConfigError);
}

class TrainRun : public ::testing::Test {
 protected:
  ScenarioConfig cfg = smoke_scenario();
  std::vector<ChannelSample> data = synth_channels(cfg, 24, 2);
  TrainConfig tc;
  ModelConfig mc;
  void SetUp() override {
    tc.epochs = 4;
    tc.batch_size = 8;
    tc.lr = 2e-3;
    tc.gamma = default_gamma(cfg, data);
    tc.seed = 3;
    mc.widths = smoke_widths(cfg.L());
  }
};

TEST_F(TrainRun, DeterministicAndFeasible) {
  auto a = make_model(mc, cfg, 1), b = make_model(mc, cfg, 1);
  TrainState sa, sb;
  const TrainReport ra = train(*a, data, tc, sa), rb = train(*b, data, tc, sb);
  ASSERT_EQ(ra.epochs.size(), 4u);
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(ra.epochs[e].epoch, static_cast<int>(e) + 1);
    EXPECT_EQ(ra.epochs[e].loss, rb.epochs[e].loss);
    EXPECT_LE(ra.epochs[e].max_power_excess, 1e-9);
  }
  EXPECT_EQ(sa.next_epoch, 5);
  EXPECT_EQ(sa.optimizer.steps(), 12);
  for (std::size_t i = 0; i < a->params().tensors().size(); ++i) {
    EXPECT_EQ(a->params().tensors()[i].value, b->params().tensors()[i].value);
  }
}

TEST_F(TrainRun, ResumeGivesIdenticalNextEpoch) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "coisac_resume_test";
  fs::remove_all(dir);
  auto m = make_model(mc, cfg, 1);
  TrainState st;
  tc.epochs = 2;
  train(*m, data, tc, st);
  save_checkpoint(dir / "r.ckpt", *m, {{"next_epoch", std::to_string(st.next_epoch)}},
                  &st.optimizer);
  tc.epochs = 3;
  std::vector<double> next;
  for (int rep = 0; rep < 2; ++rep) {
    const Checkpoint c = read_checkpoint(dir / "r.ckpt");
    auto r = restore_model(c);
    TrainState rs;
    rs.optimizer.set_state(*c.optimizer);
    rs.next_epoch = std::stoi(*c.find_meta("next_epoch"));
    const TrainReport rep_r = train(*r, data, tc, rs);
    ASSERT_EQ(rep_r.epochs.size(), 1u);
    EXPECT_EQ(rep_r.epochs[0].epoch, 3);
    next.push_back(rep_r.epochs[0].loss);
  }
  EXPECT_EQ(next[0], next[1]);
  fs::remove_all(dir);
}

TEST_F(TrainRun, PerturbedInputsLeaveCleanDataAlone) {
  PerturbationSpec p;
  p.csi_snr_db = 5.0;
  p.pos_err = PerturbationSpec::Range{2.0, 3.0};
  p.seed = 4;
  tc.perturbation = p;
  tc.epochs = 2;
  const std::uint64_t before = dataset_hash(data);
  auto m = make_model(mc, cfg, 1);
  TrainState st;
  const TrainReport r = train(*m, data, tc, st);
  EXPECT_EQ(dataset_hash(data), before);
  bool stamped = false;
  for (const auto& [k, v] : r.meta) stamped = stamped || k == "perturbation";
  EXPECT_TRUE(stamped);
}

TEST_F(TrainRun, NonFiniteInputAbortsAfterOneRetry) {
  data[5].H(0, 0) = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
  auto m = make_model(mc, cfg, 1);
  TrainState st;
  try {
    train(*m, data, tc, st);
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_EQ(e.term(), "rate");
    EXPECT_LT(e.batch_index(), 3u);
  }
  EXPECT_DOUBLE_EQ(st.optimizer.lr, 0.5 * tc.lr);
  EXPECT_EQ(st.next_epoch, 1);
}

TEST_F(TrainRun, ReportCsv) {
  namespace fs = std::filesystem;
  auto m = make_model(mc, cfg, 1);
  TrainState st;
  tc.epochs = 2;
  const TrainReport r = train(*m, data, tc, st);
  const fs::path p = fs::temp_directory_path() / "coisac_report_test.csv";
  write_report_csv(p, r);
  std::ifstream is(p);
  std::string line;
  int comments = 0, rows = 0;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.rfind("#", 0) == 0) {
      ++comments;
    } else if (line == "epoch,loss,mean_rate,mean_speb,viol_speb_frac,viol_rate_frac") {
      header = true;
    } else {
      ++rows;
    }
  }
  EXPECT_TRUE(header);
  EXPECT_EQ(rows, 2);
  EXPECT_GT(comments, 5);
  fs::remove(p);
}

TEST(Evaluate, ReferenceBeamsAreFeasible) {
  const ScenarioConfig cfg = smoke_scenario();
  const auto data = synth_channels(cfg, 20, 1);
  const double gamma = default_gamma(cfg, data);
  const EvalResult r = evaluate_beams(
      [&](const ChannelSample& s) { return reference_beamformer(s, cfg); }, cfg, data, gamma, 0.05);
  EXPECT_LE(r.max_power_excess, 1e-12);
  EXPECT_EQ(r.sum_rates.size(), 20u);
  EXPECT_GT(r.viol_speb_frac, 0.3);  // gamma is the median
  EXPECT_LT(r.viol_speb_frac, 0.7);
}

}  // namespace
}  // namespace coisac
