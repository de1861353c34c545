// SPDX-License-Identifier: Apache-2.0
#include "coisac/expcli.hpp"

#include <yaml-cpp/yaml.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <tuple>
#include <set>
#include <sstream>

#include "coisac/baselines.hpp"
#include "coisac/checkpoint.hpp"
#include "coisac/rng.hpp"

namespace coisac {

namespace fs = std::filesystem;

Profile make_profile(std::string_view name) {
  Profile p;
  p.name = std::string(name);
  if (name == "paper") {
    p.scenario = paper_scenario();
    p.model.widths = paper_widths(p.scenario.L());
    p.n_train = 4000;
    p.n_test = 500;
  } else if (name == "smoke") {
    p.scenario = smoke_scenario();
    p.model.widths = smoke_widths(p.scenario.L());
    p.train.epochs = 100;
    p.train.batch_size = 16;
    p.train.lr = 2e-3;
    p.n_train = 1024;
    p.n_test = 256;
  } else {
    throw ConfigError("unknown profile '" + std::string(name) + "' (paper, smoke)");
  }
  return p;
}

namespace {

template <typename T>
void maybe(const YAML::Node& n, const char* key, T& dst) {
  if (n[key]) dst = n[key].as<T>();
}

}  // namespace

void apply_config(Profile& p, const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
  try {
    if (root["scenario"]) p.scenario = parse_scenario(yaml_text);
    const int L = p.scenario.L();
    if (const YAML::Node m = root["model"]) {
      if (m["widths"]) {
        p.model.widths = {2 * L};
        for (const auto& w : m["widths"]) p.model.widths.push_back(w.as<int>());
      }
      maybe(m, "head_hidden", p.model.head_hidden);
      maybe(m, "conv_channels1", p.model.conv_channels1);
      maybe(m, "conv_channels2", p.model.conv_channels2);
      maybe(m, "conv_kernel", p.model.conv_kernel);
      maybe(m, "fc_hidden", p.model.fc_hidden);
    }
    // the input width follows the antenna count; hidden widths are kept
    if (!p.model.widths.empty()) p.model.widths.front() = 2 * L;
    if (const YAML::Node t = root["train"]) {
      maybe(t, "epochs", p.train.epochs);
      maybe(t, "batch_size", p.train.batch_size);
      maybe(t, "lr", p.train.lr);
      maybe(t, "weight_decay", p.train.weight_decay);
      maybe(t, "rho1_slope", p.train.rho1_slope);
      maybe(t, "rho2_slope", p.train.rho2_slope);
      maybe(t, "r_min", p.train.r_min);
      maybe(t, "gamma", p.train.gamma);
      maybe(t, "n_train", p.n_train);
      maybe(t, "n_test", p.n_test);
      maybe(t, "n_calib", p.n_calib);
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  p.scenario.validate();
}

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"lhgnn",      "lhgnn_no_attention", "homo_gnn",
                                             "naive_conv", "reference",          "random"};
  return m;
}

bool is_learned_method(std::string_view method) {
  return method != "reference" && method != "random";
}

namespace {

void check_method(const std::string& m) {
  const auto& k = known_methods();
  if (std::find(k.begin(), k.end(), m) == k.end()) throw ConfigError("unknown method '" + m + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string fmt3(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw MissingArtifact("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<ChannelSample> test_set(const ScenarioConfig& cfg, int n, std::uint64_t seed) {
  return synth_channels(cfg, static_cast<std::size_t>(n), derive_seed(seed, Stream::kEvalData, 0));
}

double calibrated_gamma(const Profile& p, std::uint64_t seed) {
  if (p.train.gamma > 0.0) return p.train.gamma;
  const auto calib = synth_channels(p.scenario, static_cast<std::size_t>(std::max(16, p.n_calib)),
                                    derive_seed(seed, Stream::kCalibration, 1));
  return default_gamma(p.scenario, calib);
}

struct TrainOutcome {
  std::unique_ptr<Model> model;
  TrainReport report;
  double gamma = 0.0;
};

// Trains one learned method and writes its checkpoint (every 10 epochs and
// at the end, so an interrupted run can resume).
TrainOutcome train_method(const Profile& p, const std::string& method, std::uint64_t seed,
                          const std::vector<ChannelSample>& data,
                          const std::optional<PerturbationSpec>& pert, const fs::path& ckpt,
                          const MetaList& extra_meta, const Checkpoint* resume, std::ostream& log) {
  TrainOutcome o;
  TrainConfig tc = p.train;
  tc.seed = seed;
  tc.perturbation = pert;
  TrainState state;
  if (resume) {
    o.model = restore_model(*resume);
    if (model_tag(o.model->kind()) != method) {
      throw ConfigError("checkpoint holds '" + std::string(model_tag(o.model->kind())) +
                        "', not '" + method + "'");
    }
    if (resume->optimizer) state.optimizer.set_state(*resume->optimizer);
    const auto next = resume->find_meta("next_epoch");
    const auto gamma = resume->find_meta("gamma");
    if (!next || !gamma) throw FormatError("checkpoint lacks resume metadata");
    state.next_epoch = std::stoi(*next);
    tc.gamma = std::stod(*gamma);
  } else {
    ModelConfig mc = p.model;
    mc.kind = parse_model_tag(method);
    o.model = make_model(mc, p.scenario, seed);
    tc.gamma = calibrated_gamma(p, seed);
  }
  o.gamma = tc.gamma;
  MetaList meta = {{"profile", p.name},
                   {"method", method},
                   {"seed", std::to_string(seed)},
                   {"gamma", fmt17(tc.gamma)},
                   {"gamma_source", p.train.gamma > 0.0 ? "config" : "reference_beamformer_median"},
                   {"epochs", std::to_string(tc.epochs)},
                   {"n_train", std::to_string(data.size())}};
  if (o.model->kind() == ModelKind::kNaiveConv) {
    const ModelConfig& mc = o.model->config();
    meta.emplace_back("naive_conv", "conv" + std::to_string(mc.conv_kernel) + "x" +
                                        std::to_string(mc.conv_kernel) + " " +
                                        std::to_string(mc.conv_channels1) + "," +
                                        std::to_string(mc.conv_channels2) + " fc " +
                                        std::to_string(mc.fc_hidden));
  }
  for (const auto& kv : extra_meta) meta.push_back(kv);
  auto save = [&](const Model& m, const TrainState& st) {
    MetaList mm = meta;
    mm.emplace_back("next_epoch", std::to_string(st.next_epoch));
    save_checkpoint(ckpt, m, mm, &st.optimizer);
  };
  o.report = train(*o.model, data, tc, state,
                   [&](const EpochRecord& e, const Model& m, const TrainState& st) {
                     if (e.epoch % 10 == 0 || e.epoch == tc.epochs) {
                       log << "  epoch " << e.epoch << " loss " << fmt(e.loss) << " rate "
                           << fmt(e.mean_rate) << " speb " << fmt(e.mean_speb) << "\n";
                       save(m, st);
                     }
                   });
  if (o.report.epochs.empty()) save(*o.model, state);
  o.report.checkpoint = ckpt.string();
  for (const auto& kv : meta) o.report.meta.push_back(kv);
  return o;
}

std::optional<PerturbationSpec> axis_perturbation(const std::string& axis, double value,
                                                  std::uint64_t seed) {
  if (axis == "power_dbm") return std::nullopt;
  PerturbationSpec s;
  s.seed = seed;
  if (axis == "csi_snr_db") {
    s.csi_snr_db = value;
  } else {
    s.pos_err = PerturbationSpec::Range{value, value + 1.0};
  }
  s.validate();
  return s;
}

EvalResult eval_fixed_rule(const std::string& method, const ScenarioConfig& cfg,
                           const std::vector<ChannelSample>& test, double gamma, double r_min,
                           const std::optional<PerturbationSpec>& pert, std::uint64_t seed) {
  return evaluate_beams(
      [&](const ChannelSample& clean) {
        if (method == "random") {
          return random_beamformer(derive_seed(seed, Stream::kRandomBeam, clean.sample_id), cfg);
        }
        return reference_beamformer(pert ? perturb(clean, *pert, cfg) : clean, cfg);
      },
      cfg, test, gamma, r_min);
}

}  // namespace

void ExperimentSpec::validate() const {
  if (methods.empty()) throw ConfigError("sweep needs at least one method");
  for (const auto& m : methods) check_method(m);
  if (axis != "power_dbm" && axis != "csi_snr_db" && axis != "pos_err_m") {
    throw ConfigError("sweep axis must be power_dbm, csi_snr_db or pos_err_m");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  if (out.empty()) throw ConfigError("sweep needs an output directory");
  make_profile(profile);
}

ExperimentSpec load_experiment(const fs::path& path) {
  const std::string text = read_text(path);
  ExperimentSpec s;
  try {
    const YAML::Node root = YAML::Load(text);
    const YAML::Node n = root["sweep"] ? root["sweep"] : root;
    maybe(n, "profile", s.profile);
    maybe(n, "scenario", s.scenario);
    if (n["methods"]) {
      for (const auto& m : n["methods"]) s.methods.push_back(m.as<std::string>());
    }
    maybe(n, "axis", s.axis);
    if (n["values"]) {
      for (const auto& v : n["values"]) s.values.push_back(v.as<double>());
    }
    maybe(n, "seeds", s.seeds);
    maybe(n, "seed", s.seed);
    std::string out;
    maybe(n, "out", out);
    s.out = out;
    maybe(n, "n_train", s.n_train);
    maybe(n, "n_test", s.n_test);
    maybe(n, "epochs", s.epochs);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("sweep spec: ") + e.what());
  }
  const fs::path base = path.parent_path();
  if (!s.out.empty() && s.out.is_relative()) s.out = (base / s.out).lexically_normal();
  if (!s.scenario.empty() && s.scenario != "paper" && s.scenario != "smoke" &&
      fs::path(s.scenario).is_relative()) {
    s.scenario = (base / s.scenario).lexically_normal().string();
  }
  s.validate();
  return s;
}

namespace {

Profile sweep_profile(const ExperimentSpec& spec) {
  Profile p = make_profile(spec.profile);
  if (spec.scenario == "paper" || spec.scenario == "smoke") {
    p.scenario = spec.scenario == "paper" ? paper_scenario() : smoke_scenario();
    p.model.widths.front() = 2 * p.scenario.L();
  } else if (!spec.scenario.empty()) {
    apply_config(p, read_text(spec.scenario));
  }
  if (spec.n_train > 0) p.n_train = spec.n_train;
  if (spec.n_test > 0) p.n_test = spec.n_test;
  if (spec.epochs > 0) p.train.epochs = spec.epochs;
  return p;
}

std::string value_tag(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, bool train_inline, std::ostream& log) {
  spec.validate();
  const Profile base = sweep_profile(spec);
  const fs::path ckpt_dir = spec.out / "ckpt";

  auto ckpt_path = [&](const std::string& m, double v, int s) {
    return ckpt_dir / (m + "_" + spec.axis + "_" + value_tag(v) + "_s" + std::to_string(s) + ".ckpt");
  };
  if (!train_inline) {
    std::vector<std::string> missing;
    for (const auto& m : spec.methods) {
      if (!is_learned_method(m)) continue;
      for (double v : spec.values)
        for (int s = 0; s < spec.seeds; ++s)
          if (!fs::exists(ckpt_path(m, v, s))) {
            missing.push_back(m + " at " + spec.axis + "=" + value_tag(v) + " seed " + std::to_string(s));
          }
    }
    if (!missing.empty()) {
      std::string msg = "missing checkpoints (use --train-inline to train them):";
      for (const auto& x : missing) msg += "\n  " + x;
      throw MissingArtifact(msg);
    }
  }

  std::vector<SweepRow> rows;
  for (double v : spec.values) {
    Profile p = base;
    if (spec.axis == "power_dbm") p.scenario = p.scenario.with_power(dbm_to_watts(v));
    for (int s = 0; s < spec.seeds; ++s) {
      const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(s);
      const auto test = test_set(p.scenario, p.n_test, seed);
      const double gamma = calibrated_gamma(p, seed);
      const auto eval_pert =
          axis_perturbation(spec.axis, v, derive_seed(seed, Stream::kNoisyTwin, 1));
      for (const auto& m : spec.methods) {
        EvalResult r;
        if (is_learned_method(m)) {
          const fs::path cp = ckpt_path(m, v, s);
          std::unique_ptr<Model> model;
          if (train_inline && !fs::exists(cp)) {
            log << "train " << m << " " << spec.axis << "=" << value_tag(v) << " seed " << s << "\n";
            const auto data = synth_channels(p.scenario, static_cast<std::size_t>(p.n_train), seed);
            const auto train_pert =
                axis_perturbation(spec.axis, v, derive_seed(seed, Stream::kNoisyTwin, 0));
            train_method(p, m, seed, data, train_pert, cp,
                         {{"axis", spec.axis}, {"value", fmt17(v)}}, nullptr, log);
          }
          // always evaluate the stored (f32) parameters so reruns match
          model = restore_model(read_checkpoint(cp));
          model->set_power_budget(p.scenario.power_budget);
          r = evaluate(*model, test, gamma, p.train.r_min, eval_pert);
        } else {
          r = eval_fixed_rule(m, p.scenario, test, gamma, p.train.r_min, eval_pert, seed);
        }
        log << "eval " << m << " " << spec.axis << "=" << value_tag(v) << " seed " << s
            << " rate " << fmt(r.mean_sum_rate) << " speb " << fmt(r.mean_speb) << "\n";
        rows.push_back({m, v, s, r.mean_sum_rate, r.mean_speb, r.viol_speb_frac});
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.method, a.value, a.seed) < std::tie(b.method, b.value, b.seed);
  });
  return rows;
}

namespace {

constexpr const char* kResultsHeader =
    "run_id,method,axis,value,seed,mean_sum_rate,mean_speb,viol_speb_frac";

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& csv) {
  std::ifstream is(csv);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line == kResultsHeader) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    out.push_back(std::move(cells));
  }
  return out;
}

}  // namespace

std::string append_results(const fs::path& csv, const ExperimentSpec& spec,
                           const std::vector<SweepRow>& rows) {
  std::set<std::string> runs;
  if (fs::exists(csv)) {
    for (const auto& r : read_csv_rows(csv))
      if (!r.empty()) runs.insert(r[0]);
  }
  std::ostringstream id;
  id << 'r' << std::setw(4) << std::setfill('0') << runs.size() + 1;
  const bool fresh = !fs::exists(csv);
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  std::ofstream os(csv, std::ios::app);
  if (!os) throw Error("cannot append to " + csv.string());
  if (fresh) os << kResultsHeader << "\n";
  for (const auto& r : rows) {
    os << id.str() << ',' << r.method << ',' << spec.axis << ',' << fmt(r.value) << ',' << r.seed
       << ',' << fmt(r.mean_sum_rate) << ',' << fmt(r.mean_speb) << ',' << fmt(r.viol_speb_frac)
       << "\n";
  }
  return id.str();
}

namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> pts;
};

void write_svg(const fs::path& path, const std::string& title, const std::string& xlabel,
               const std::string& ylabel, const std::vector<Series>& series, bool log_y) {
  const double W = 640, H = 420, l = 70, r = 150, t = 40, b = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  auto ty = [&](double y) { return log_y ? std::log10(std::max(y, 1e-300)) : y; };
  for (const auto& s : series)
    for (auto [x, y] : s.pts) {
      if (!std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, ty(y));
      y1 = std::max(y1, ty(y));
    }
  if (x0 > x1) return;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return l + (x - x0) / (x1 - x0) * (W - l - r); };
  auto py = [&](double y) { return H - b - (ty(y) - y0) / (y1 - y0) * (H - t - b); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ofstream os(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title
     << "</text>\n";
  os << "<line x1=\"" << l << "\" y1=\"" << H - b << "\" x2=\"" << W - r << "\" y2=\"" << H - b
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << l << "\" y1=\"" << t << "\" x2=\"" << l << "\" y2=\"" << H - b
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    const double yl = log_y ? std::pow(10.0, yv) : yv;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - b + 16 << "\" text-anchor=\"middle\">"
       << fmt(std::round(xv * 100) / 100) << "</text>\n";
    os << "<text x=\"" << l - 6 << "\" y=\"" << H - b - (H - t - b) * i / 4 + 4
       << "\" text-anchor=\"end\">" << fmt3(yl) << "</text>\n";
  }
  os << "<text x=\"" << (l + W - r) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << xlabel << "</text>\n";
  os << "<text transform=\"translate(16," << (t + H - b) / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* c = colors[i % 6];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : series[i].pts)
      if (std::isfinite(y)) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    for (auto [x, y] : series[i].pts)
      if (std::isfinite(y))
        os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    const double ly = t + 10 + 18 * i;
    os << "<line x1=\"" << W - r + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - r + 30 << "\" y2=\""
       << ly << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - r + 36 << "\" y=\"" << ly + 4 << "\">" << series[i].name << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace

std::vector<fs::path> plot_results(const fs::path& csv, const fs::path& out_dir, std::ostream& log) {
  std::vector<fs::path> written;
  try {
    const auto rows = read_csv_rows(csv);
    if (rows.empty()) return written;
    // latest run only
    const std::string run = rows.back()[0];
    std::map<std::string, std::map<double, std::pair<double, int>>> rate, speb;
    std::string axis;
    for (const auto& r : rows) {
      if (r.size() < 8 || r[0] != run) continue;
      axis = r[2];
      const double v = std::stod(r[3]);
      auto& a = rate[r[1]][v];
      a.first += std::stod(r[5]);
      ++a.second;
      auto& s = speb[r[1]][v];
      s.first += std::stod(r[6]);
      ++s.second;
    }
    auto to_series = [](const auto& m) {
      std::vector<Series> out;
      for (const auto& [name, pts] : m) {
        Series s{name, {}};
        for (const auto& [x, acc] : pts) s.pts.emplace_back(x, acc.first / acc.second);
        out.push_back(std::move(s));
      }
      return out;
    };
    const std::map<std::string, std::string> labels = {
        {"power_dbm", "transmit power (dBm)"},
        {"csi_snr_db", "channel estimate SNR (dB)"},
        {"pos_err_m", "position error lower bound (m)"}};
    const std::string xl = labels.count(axis) ? labels.at(axis) : axis;
    fs::create_directories(out_dir);
    const fs::path a = out_dir / ("rate_vs_" + axis + ".svg");
    const fs::path b = out_dir / ("speb_vs_" + axis + ".svg");
    write_svg(a, "Achievable sum rate", xl, "sum rate (bit/s/Hz)", to_series(rate), false);
    write_svg(b, "SPEB", xl, "SPEB (m^2)", to_series(speb), true);
    written = {a, b};
  } catch (const std::exception& e) {
    log << "warning: plotting failed: " << e.what() << "\n";
    written.clear();
  }
  return written;
}

namespace {

struct Common {
  std::string config;
  std::string profile = "smoke";
  std::uint64_t seed = 0;
};

Profile load_profile(const Common& c) {
  Profile p = make_profile(c.profile);
  if (!c.config.empty()) apply_config(p, read_text(c.config));
  return p;
}

int cmd_gen(const Common& c, const std::string& out_path, int n, std::ostream& out) {
  const Profile p = load_profile(c);
  if (out_path.empty()) throw ConfigError("gen needs --out");
  const int count = n > 0 ? n : p.n_train;
  const auto data = synth_channels(p.scenario, static_cast<std::size_t>(count), c.seed);
  save_dataset(out_path, p.scenario, data);
  out << "wrote " << out_path << ": N=" << p.scenario.N << " K=" << p.scenario.K
      << " Z=" << p.scenario.Z << " L=" << p.scenario.L() << " n=" << count << " seed=" << c.seed
      << "\n";
  return 0;
}

std::vector<ChannelSample> training_data(const Profile& p, const std::string& dataset,
                                         std::uint64_t seed) {
  if (dataset.empty()) return synth_channels(p.scenario, static_cast<std::size_t>(p.n_train), seed);
  return load_dataset(dataset, p.scenario);
}

int cmd_train(const Common& c, const std::string& dataset, const std::string& method,
              const std::string& out_dir, int epochs, const std::string& resume,
              std::ostream& out) {
  check_method(method);
  if (!is_learned_method(method)) throw ConfigError("'" + method + "' has nothing to train");
  if (out_dir.empty()) throw ConfigError("train needs --out");
  Profile p = load_profile(c);
  if (epochs > 0) p.train.epochs = epochs;
  std::optional<Checkpoint> ck;
  std::uint64_t seed = c.seed;
  if (!resume.empty()) {
    ck = read_checkpoint(resume);
    p.scenario = ck->scenario;
    if (const auto s = ck->find_meta("seed")) seed = std::stoull(*s);
  }
  const auto data = training_data(p, dataset, seed);
  const fs::path ckpt = fs::path(out_dir) / (method + ".ckpt");
  out << "training " << method << " (" << p.name << " profile, " << data.size() << " samples, "
      << p.train.epochs << " epochs, seed " << seed << ")\n";
  TrainOutcome o = train_method(p, method, seed, data, std::nullopt, ckpt, {},
                                ck ? &*ck : nullptr, out);
  const fs::path report = fs::path(out_dir) / (method + "_report.csv");
  write_report_csv(report, o.report);
  if (!o.report.epochs.empty()) {
    const auto& f = o.report.epochs.front();
    const auto& l = o.report.epochs.back();
    out << "loss " << fmt(f.loss) << " (epoch " << f.epoch << ") -> " << fmt(l.loss) << " (epoch "
        << l.epoch << "), mean rate " << fmt(l.mean_rate) << ", gamma " << fmt(o.gamma) << "\n";
  }
  out << "checkpoint " << ckpt.string() << "\nreport " << report.string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& dataset, const std::string& method,
             const std::string& checkpoint, double csi_snr_db, double pos_err, std::ostream& out) {
  Profile p = load_profile(c);
  std::unique_ptr<Model> model;
  std::string name = method;
  double gamma = 0.0;
  if (!checkpoint.empty()) {
    const Checkpoint ck = read_checkpoint(checkpoint);
    model = restore_model(ck);
    p.scenario = ck.scenario;
    name = std::string(model_tag(model->kind()));
    if (const auto g = ck.find_meta("gamma")) gamma = std::stod(*g);
  } else {
    if (method.empty()) throw ConfigError("eval needs --checkpoint or --method");
    check_method(method);
    if (is_learned_method(method)) throw ConfigError("learned methods need --checkpoint");
  }
  if (gamma <= 0.0) gamma = calibrated_gamma(p, c.seed);
  const auto test = dataset.empty() ? test_set(p.scenario, p.n_test, c.seed)
                                    : load_dataset(dataset, p.scenario);
  std::optional<PerturbationSpec> pert;
  if (std::isfinite(csi_snr_db) || pos_err >= 0.0) {
    PerturbationSpec s;
    s.seed = derive_seed(c.seed, Stream::kNoisyTwin, 1);
    s.csi_snr_db = csi_snr_db;
    if (pos_err >= 0.0) s.pos_err = PerturbationSpec::Range{pos_err, pos_err + 1.0};
    s.validate();
    pert = s;
  }
  const EvalResult r = model ? evaluate(*model, test, gamma, p.train.r_min, pert)
                             : eval_fixed_rule(name, p.scenario, test, gamma, p.train.r_min, pert,
                                               c.seed);
  out << "method=" << name << " n=" << test.size() << " mean_sum_rate=" << fmt(r.mean_sum_rate)
      << " mean_speb=" << fmt(r.mean_speb) << " viol_speb_frac=" << fmt(r.viol_speb_frac)
      << " viol_rate_frac=" << fmt(r.viol_rate_frac) << " gamma=" << fmt(gamma)
      << " max_power_excess=" << fmt(r.max_power_excess) << "\n";
  return 0;
}

int cmd_sweep(const std::string& spec_path, bool train_inline, const std::string& profile_flag,
              std::ostream& out) {
  if (spec_path.empty()) throw ConfigError("sweep needs --config <spec.yaml>");
  ExperimentSpec spec = load_experiment(spec_path);
  if (!profile_flag.empty()) spec.profile = profile_flag;
  const auto rows = run_sweep(spec, train_inline, out);
  const fs::path csv = spec.out / "results.csv";
  const std::string id = append_results(csv, spec, rows);
  out << "appended " << rows.size() << " rows to " << csv.string() << " as run " << id << "\n";
  for (const auto& f : plot_results(csv, spec.out / "plots", out)) out << "plot " << f.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cooperative ISAC beamforming experiments", "coisac"};
  app.require_subcommand(1);
  Common c;
  std::string dataset, method, out_path, resume, checkpoint, results;
  int n = 0, epochs = 0;
  bool train_inline = false;
  double csi_snr = std::numeric_limits<double>::infinity(), pos_err = -1.0;
  auto common = [&](CLI::App* s) {
    s->add_option("--config", c.config, "YAML config (scenario/model/train sections)");
    s->add_option("--profile", c.profile, "paper or smoke")->check(CLI::IsMember({"paper", "smoke"}));
    s->add_option("--seed", c.seed, "master seed");
  };
  CLI::App* gen = app.add_subcommand("gen", "generate a channel dataset");
  common(gen);
  gen->add_option("--out", out_path, "dataset file");
  gen->add_option("--n", n, "number of samples (default: profile training size)");
  CLI::App* tr = app.add_subcommand("train", "train a learned method");
  common(tr);
  tr->add_option("--dataset", dataset, "training dataset (default: synthesize)");
  tr->add_option("--method", method, "lhgnn, lhgnn_no_attention, homo_gnn, naive_conv")->required();
  tr->add_option("--out", out_path, "output directory");
  tr->add_option("--epochs", epochs, "override epoch count");
  tr->add_option("--resume", resume, "checkpoint to resume from");
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint or fixed method");
  common(ev);
  ev->add_option("--dataset", dataset, "test dataset (default: synthesize)");
  ev->add_option("--method", method, "reference or random (without --checkpoint)");
  ev->add_option("--checkpoint", checkpoint, "trained model");
  ev->add_option("--csi-snr-db", csi_snr, "evaluate on channel estimates at this SNR");
  ev->add_option("--pos-err", pos_err, "evaluate with position error in [v, v+1) m");
  CLI::App* sw = app.add_subcommand("sweep", "run a sweep spec");
  sw->add_option("--config", c.config, "sweep spec YAML")->required();
  sw->add_option("--profile", c.profile, "override the spec profile")
      ->check(CLI::IsMember({"paper", "smoke"}));
  sw->add_flag("--train-inline", train_inline, "train missing checkpoints");
  CLI::App* pl = app.add_subcommand("plot", "plot a results CSV");
  pl->add_option("--results", results, "results CSV")->required();
  pl->add_option("--out", out_path, "plot directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }
  try {
    if (gen->parsed()) return cmd_gen(c, out_path, n, out);
    if (tr->parsed()) return cmd_train(c, dataset, method, out_path, epochs, resume, out);
    if (ev->parsed()) return cmd_eval(c, dataset, method, checkpoint, csi_snr, pos_err, out);
    if (sw->parsed()) {
      const std::string prof = sw->count("--profile") ? c.profile : std::string();
      return cmd_sweep(c.config, train_inline, prof, out);
    }
    if (pl->parsed()) {
      if (!fs::exists(results)) throw MissingArtifact("results file not found: " + results);
      for (const auto& f : plot_results(results, out_path, err)) out << "plot " << f.string() << "\n";
      return 0;
    }
  } catch (const NonFiniteLoss& e) {
    err << "error: " << e.what() << " (term " << e.term() << ")\n";
    return 2;
  } catch (const MissingArtifact& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace coisac
