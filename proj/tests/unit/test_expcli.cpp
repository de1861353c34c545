// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coisac/checkpoint.hpp"
#include "coisac/expcli.hpp"

using namespace coisac;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("coisac_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // three-value sweep over two fixed methods and one learned one
  fs::path write_sweep(int seeds) {
    const fs::path spec = dir_ / "sweep.yaml";
    write_file(spec, "sweep:\n  profile: smoke\n  methods: [reference, random, lhgnn]\n"
                     "  axis: power_dbm\n  values: [10, 20, 30]\n  seeds: " +
                         std::to_string(seeds) +
                         "\n  n_train: 16\n  n_test: 8\n  epochs: 2\n  out: res\n");
    return spec;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST(Profiles, Defaults) {
  const Profile paper = make_profile("paper");
  EXPECT_EQ(paper.scenario.K, 5);
  EXPECT_EQ(paper.model.widths.front(), 32);
  EXPECT_EQ(paper.train.epochs, 800);
  EXPECT_EQ(paper.train.batch_size, 64);
  EXPECT_DOUBLE_EQ(paper.train.lr, 2e-4);
  EXPECT_EQ(paper.n_train, 4000);
  const Profile smoke = make_profile("smoke");
  EXPECT_EQ(smoke.scenario.L(), 4);
  EXPECT_EQ(smoke.train.epochs, 100);
  EXPECT_THROW(make_profile("huge"), ConfigError);
}

TEST(Profiles, ConfigOverrides) {
  Profile p = make_profile("smoke");
  apply_config(p, "model:\n  widths: [16, 8]\ntrain:\n  lr: 0.01\n  epochs: 7\n  n_train: 50\n");
  EXPECT_EQ(p.model.widths, (std::vector<int>{8, 16, 8}));
  EXPECT_DOUBLE_EQ(p.train.lr, 0.01);
  EXPECT_EQ(p.train.epochs, 7);
  EXPECT_EQ(p.n_train, 50);

  // a new scenario resizes the input width only
  Profile q = make_profile("smoke");
  apply_config(q, "scenario:\n  K: 1\n  array: {Lx: 1, Lz: 2}\n  carrier_ghz: 28\n"
                  "  bs_positions: [[0, 0, 6]]\n  target_positions: [[5, 30, 20]]\n"
                  "  user_region: {min: [0, 10, 1.5], max: [20, 40, 1.5]}\n  power_budget_dbm: 20\n");
  EXPECT_EQ(q.scenario.N, 1);
  EXPECT_EQ(q.model.widths, (std::vector<int>{4, 32, 32, 32}));

  EXPECT_THROW(apply_config(p, "train: {lr: [1, 2]}"), ConfigError);
  EXPECT_THROW(apply_config(p, "train: {lr: 1"), ConfigError);
}

TEST(Methods, Known) {
  EXPECT_TRUE(is_learned_method("lhgnn"));
  EXPECT_TRUE(is_learned_method("naive_conv"));
  EXPECT_FALSE(is_learned_method("reference"));
  EXPECT_FALSE(is_learned_method("random"));
  EXPECT_EQ(known_methods().size(), 6u);
}

TEST_F(CliTest, GenIsDeterministicPerSeed) {
  ASSERT_EQ(run({"gen", "--out", path("a.bin"), "--n", "20", "--seed", "3"}), 0) << err_.str();
  ASSERT_EQ(run({"gen", "--out", path("b.bin"), "--n", "20", "--seed", "3"}), 0);
  ASSERT_EQ(run({"gen", "--out", path("c.bin"), "--n", "20", "--seed", "4"}), 0);
  EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
  EXPECT_NE(slurp(path("a.bin")), slurp(path("c.bin")));
  const auto data = load_dataset(path("a.bin"), smoke_scenario());
  EXPECT_EQ(data.size(), 20u);
}

TEST_F(CliTest, UsageAndConfigErrorsExitOne) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({"gen", "--out", path("x.bin"), "--profile", "huge"}), 1);
  write_file(dir_ / "bad.yaml", "scenario: {K: 2");
  EXPECT_EQ(run({"gen", "--out", path("x.bin"), "--config", path("bad.yaml")}), 1);
  EXPECT_NE(err_.str().find("YAML"), std::string::npos);
  EXPECT_EQ(run({"train", "--method", "wmmse", "--out", path("t")}), 1);
  EXPECT_EQ(run({"train", "--method", "reference", "--out", path("t")}), 1);
  EXPECT_EQ(run({"eval", "--method", "lhgnn"}), 1);
  // dataset built for another scenario
  ASSERT_EQ(run({"gen", "--out", path("p.bin"), "--n", "2", "--profile", "paper"}), 0);
  EXPECT_EQ(run({"train", "--method", "lhgnn", "--dataset", path("p.bin"), "--out", path("t")}), 1);
}

TEST_F(CliTest, MissingArtifactsExitThree) {
  EXPECT_EQ(run({"eval", "--checkpoint", path("none.ckpt")}), 3);
  EXPECT_EQ(run({"train", "--method", "lhgnn", "--resume", path("none.ckpt"), "--out", path("t")}), 3);
  EXPECT_EQ(run({"eval", "--method", "reference", "--dataset", path("none.bin")}), 3);
  EXPECT_EQ(run({"plot", "--results", path("none.csv"), "--out", path("p")}), 3);
  const fs::path spec = write_sweep(1);
  EXPECT_EQ(run({"sweep", "--config", spec.string()}), 3);
  EXPECT_NE(err_.str().find("lhgnn at power_dbm=30 seed 0"), std::string::npos) << err_.str();
}

TEST_F(CliTest, DivergenceExitsTwo) {
  write_file(dir_ / "hot.yaml", "train:\n  lr: 1.0e+200\n");
  EXPECT_EQ(run({"train", "--method", "lhgnn", "--config", path("hot.yaml"), "--epochs", "3",
                 "--out", path("t")}),
            2)
      << out_.str() << err_.str();
}

TEST_F(CliTest, TrainEvalAndResume) {
  ASSERT_EQ(run({"gen", "--out", path("d.bin"), "--n", "24", "--seed", "1"}), 0);
  ASSERT_EQ(run({"train", "--method", "homo_gnn", "--dataset", path("d.bin"), "--epochs", "3",
                 "--out", path("a")}),
            0)
      << err_.str();
  ASSERT_EQ(run({"train", "--method", "homo_gnn", "--dataset", path("d.bin"), "--epochs", "3",
                 "--out", path("b")}),
            0);
  EXPECT_EQ(slurp(path("a/homo_gnn.ckpt")), slurp(path("b/homo_gnn.ckpt")));
  EXPECT_TRUE(fs::exists(path("a/homo_gnn_report.csv")));

  const Checkpoint ck = read_checkpoint(path("a/homo_gnn.ckpt"));
  EXPECT_EQ(ck.find_meta("next_epoch").value_or(""), "4");
  EXPECT_EQ(ck.find_meta("gamma_source").value_or(""), "reference_beamformer_median");
  ASSERT_TRUE(ck.optimizer.has_value());
  EXPECT_EQ(ck.optimizer->t, 3 * 2);  // 24 samples, batch 16

  ASSERT_EQ(run({"eval", "--checkpoint", path("a/homo_gnn.ckpt")}), 0);
  const std::string first = out_.str();
  EXPECT_NE(first.find("method=homo_gnn"), std::string::npos);
  ASSERT_EQ(run({"eval", "--checkpoint", path("a/homo_gnn.ckpt")}), 0);
  EXPECT_EQ(out_.str(), first);

  ASSERT_EQ(run({"train", "--method", "homo_gnn", "--dataset", path("d.bin"), "--epochs", "5",
                 "--resume", path("a/homo_gnn.ckpt"), "--out", path("a")}),
            0)
      << err_.str();
  EXPECT_NE(out_.str().find("(epoch 4)"), std::string::npos) << out_.str();
  const Checkpoint resumed = read_checkpoint(path("a/homo_gnn.ckpt"));
  EXPECT_EQ(resumed.find_meta("next_epoch").value_or(""), "6");
  EXPECT_EQ(resumed.find_meta("gamma"), ck.find_meta("gamma"));
  // resuming with the wrong method is refused
  EXPECT_EQ(run({"train", "--method", "lhgnn", "--dataset", path("d.bin"), "--resume",
                 path("a/homo_gnn.ckpt"), "--out", path("c")}),
            1);
}

TEST_F(CliTest, SweepRowsAndAppendOnlyRunIds) {
  const fs::path spec = write_sweep(2);
  ASSERT_EQ(run({"sweep", "--config", spec.string(), "--train-inline"}), 0) << err_.str();
  const fs::path csv = dir_ / "res" / "results.csv";
  const auto first = lines_of(csv);
  ASSERT_EQ(first.size(), 1u + 3 * 3 * 2);
  EXPECT_EQ(first[0], "run_id,method,axis,value,seed,mean_sum_rate,mean_speb,viol_speb_frac");
  for (std::size_t i = 1; i < first.size(); ++i) EXPECT_EQ(first[i].substr(0, 6), "r0001,");
  EXPECT_TRUE(fs::exists(dir_ / "res" / "plots" / "rate_vs_power_dbm.svg"));

  // second run reuses the checkpoints and appends identical numbers
  ASSERT_EQ(run({"sweep", "--config", spec.string()}), 0) << err_.str();
  const auto second = lines_of(csv);
  ASSERT_EQ(second.size(), 1u + 2 * 18);
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(second[i], first[i]);
  for (std::size_t i = 1; i < first.size(); ++i) {
    EXPECT_EQ("r0002" + second[18 + i].substr(5), "r0002" + first[i].substr(5));
  }
}

TEST_F(CliTest, RateGrowsWithPowerForReference) {
  const ExperimentSpec spec = [&] {
    ExperimentSpec s;
    s.methods = {"reference"};
    s.axis = "power_dbm";
    s.values = {0, 10, 20, 30};
    s.n_test = 32;
    s.out = dir_;
    return s;
  }();
  std::ostringstream log;
  const auto rows = run_sweep(spec, false, log);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(rows[i].mean_sum_rate, rows[i - 1].mean_sum_rate);
}

TEST_F(CliTest, ExperimentSpecValidation) {
  write_file(dir_ / "s.yaml", "sweep:\n  methods: [lhgnn]\n  axis: power_dbm\n  values: [1]\n"
                              "  out: sub/dir\n  scenario: scen.yaml\n");
  write_file(dir_ / "scen.yaml", "train: {epochs: 1}\n");
  const ExperimentSpec s = load_experiment(dir_ / "s.yaml");
  EXPECT_EQ(s.out, dir_ / "sub/dir");
  EXPECT_EQ(fs::path(s.scenario), dir_ / "scen.yaml");

  ExperimentSpec bad = s;
  bad.axis = "bandwidth";
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.methods = {"wmmse"};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.values.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = s;
  bad.seeds = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(load_experiment(dir_ / "absent.yaml"), MissingArtifact);
}

TEST_F(CliTest, PlotNeverThrows) {
  write_file(dir_ / "junk.csv", "r0001,lhgnn,power_dbm,abc,0,x,y,z\n");
  std::ostringstream log;
  EXPECT_TRUE(plot_results(dir_ / "junk.csv", dir_ / "plots", log).empty());
  EXPECT_NE(log.str().find("warning"), std::string::npos);
}
