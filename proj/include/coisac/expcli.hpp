// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "coisac/model.hpp"
#include "coisac/training.hpp"

namespace coisac {

// Bundled defaults for one problem size.
struct Profile {
  std::string name;
  ScenarioConfig scenario;
  ModelConfig model;  // kind is filled in per method
  TrainConfig train;  // gamma left at 0: computed from calibration data
  int n_train = 0;
  int n_test = 0;
  int n_calib = 64;
};

// "paper": published geometry, full width schedule, 800 epochs, lr 2e-4,
// batch 64, 4000 training samples.
// "smoke": two BSs, two users, 2x2 arrays, reduced widths, 100 epochs.
Profile make_profile(std::string_view name);  // throws ConfigError

// Applies the optional `scenario`, `model` and `train` sections of a YAML
// config on top of the profile.
void apply_config(Profile& p, const std::string& yaml_text);

bool is_learned_method(std::string_view method);
// Every method name accepted by train/eval/sweep.
const std::vector<std::string>& known_methods();

struct ExperimentSpec {
  std::string profile = "smoke";
  std::string scenario;  // "paper", "smoke", or a YAML path; empty = profile default
  std::vector<std::string> methods;
  std::string axis;  // power_dbm | csi_snr_db | pos_err_m
  std::vector<double> values;
  int seeds = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  int n_train = 0;  // 0 = profile default
  int n_test = 0;
  int epochs = 0;

  void validate() const;  // throws ConfigError
};

// Relative scenario/out paths resolve against the spec file's directory.
ExperimentSpec load_experiment(const std::filesystem::path& path);

struct SweepRow {
  std::string method;
  double value = 0.0;
  int seed = 0;
  double mean_sum_rate = 0.0;
  double mean_speb = 0.0;
  double viol_speb_frac = 0.0;
};

// One evaluation per (method, value, seed), sorted by that key. Learned
// methods load out/ckpt/<method>_<axis>_<value>_s<seed>.ckpt, or train it
// first when train_inline is set. Throws MissingArtifact listing every
// absent checkpoint otherwise.
std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, bool train_inline, std::ostream& log);

// Appends rows under a fresh run id ("r0001", "r0002", ...) and returns it.
std::string append_results(const std::filesystem::path& csv, const ExperimentSpec& spec,
                           const std::vector<SweepRow>& rows);

// Line charts (rate and SPEB against the sweep value, one line per method)
// from a results CSV. Returns the files written; never throws.
std::vector<std::filesystem::path> plot_results(const std::filesystem::path& csv,
                                                const std::filesystem::path& out_dir,
                                                std::ostream& log);

// Entry point of the `coisac` executable. Exit codes: 0 ok, 1 usage or
// config error, 2 numerical failure, 3 missing artifact.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coisac
