// SPDX-License-Identifier: Apache-2.0
#include "coisac/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "coisac/baselines.hpp"
#include "coisac/rng.hpp"

namespace coisac {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  if (rho1_slope < 0.0 || rho2_slope < 0.0) throw ConfigError("penalty slopes must be >= 0");
  if (!(r_min >= 0.0)) throw ConfigError("r_min must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and > 0");
  if (perturbation) perturbation->validate();
}

Penalty penalty_schedule(int epoch, const TrainConfig& cfg) {
  return {cfg.rho1_slope * epoch, cfg.rho2_slope * epoch};
}

namespace {

RMat target_jacobian(const ScenarioConfig& cfg, const ChannelSample& s, int z) {
  return position_jacobian(cfg.bs_positions, s.target_pos.at(z)).Q;
}

}  // namespace

SampleLoss sample_loss(const BeamformingMatrix& P, const ChannelSample& clean,
                       const LossContext& ctx) {
  const ScenarioConfig& cfg = *ctx.cfg;
  SampleLoss out;
  out.rates = rates(clean.H, P, cfg.noise_power);
  for (double r : out.rates) {
    out.sum_rate += r;
    out.rate_hinge += std::max(0.0, ctx.r_min - r);
  }
  for (int z = 0; z < cfg.Z; ++z) {
    const SensingOperators ops = build_operators(clean, cfg, z, ctx.cache);
    const SpebResult res = speb(P.P, ops, target_jacobian(cfg, clean, z), cfg.noise_power);
    out.speb.push_back(res.value);
    out.speb_hinge += std::max(0.0, res.value - ctx.gamma);
    out.ill_conditioned = out.ill_conditioned || res.ill_conditioned;
  }
  return out;
}

CMat sample_loss_gradient(const BeamformingMatrix& P, const ChannelSample& clean,
                          const LossContext& ctx, const Penalty& rho, const SampleLoss& value) {
  const ScenarioConfig& cfg = *ctx.cfg;
  std::vector<double> w(cfg.K);
  for (int k = 0; k < cfg.K; ++k) w[k] = -1.0 - (value.rates[k] < ctx.r_min ? rho.rho2 : 0.0);
  CMat g = weighted_rate_gradient(clean.H, P, cfg.noise_power, w);
  if (rho.rho1 > 0.0) {
    for (int z = 0; z < cfg.Z; ++z) {
      if (!(value.speb[z] > ctx.gamma)) continue;
      const SensingOperators ops = build_operators(clean, cfg, z, ctx.cache);
      g += rho.rho1 * speb_gradient(P.P, ops, target_jacobian(cfg, clean, z), cfg.noise_power);
    }
  }
  return g;
}

namespace {

struct Accum {
  double loss = 0.0, rate = 0.0, speb = 0.0, viol_s = 0.0, viol_r = 0.0;
  std::size_t n = 0, n_speb = 0, n_users = 0, ill = 0;

  void add(const SampleLoss& s, const Penalty& rho, double gamma, double r_min) {
    loss += -s.sum_rate + rho.rho1 * s.speb_hinge + rho.rho2 * s.rate_hinge;
    rate += s.sum_rate;
    for (double v : s.speb) {
      speb += v;
      viol_s += v > gamma;
      ++n_speb;
    }
    for (double r : s.rates) {
      viol_r += r < r_min;
      ++n_users;
    }
    ill += s.ill_conditioned;
    ++n;
  }
};

}  // namespace

BatchLoss loss(const std::vector<BeamformingMatrix>& P, const std::vector<const ChannelSample*>& clean,
               const LossContext& ctx, const Penalty& rho) {
  if (P.size() != clean.size() || P.empty()) throw DimensionError("loss needs one P per sample");
  Accum a;
  for (std::size_t i = 0; i < P.size(); ++i) a.add(sample_loss(P[i], *clean[i], ctx), rho, ctx.gamma, ctx.r_min);
  BatchLoss b;
  b.total = a.loss / a.n;
  b.mean_sum_rate = a.rate / a.n;
  b.mean_speb = a.speb / std::max<std::size_t>(a.n_speb, 1);
  b.viol_speb_frac = a.viol_s / std::max<std::size_t>(a.n_speb, 1);
  b.viol_rate_frac = a.viol_r / std::max<std::size_t>(a.n_users, 1);
  b.ill_conditioned = a.ill;
  return b;
}

double default_gamma(const ScenarioConfig& cfg, const std::vector<ChannelSample>& calib) {
  if (calib.size() < 16) throw ConfigError("default_gamma needs at least 16 calibration samples");
  ProjectorCache cache;
  std::vector<double> v;
  for (const auto& s : calib) {
    const BeamformingMatrix bf = reference_beamformer(s, cfg);
    for (int z = 0; z < cfg.Z; ++z) {
      const SensingOperators ops = build_operators(s, cfg, z, &cache);
      v.push_back(speb(bf.P, ops, target_jacobian(cfg, s, z), cfg.noise_power).value);
    }
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void write_report_csv(const std::filesystem::path& path, const TrainReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string());
  for (const auto& [k, v] : report.meta) os << "# " << k << ": " << v << "\n";
  os << "# wall_seconds: " << report.wall_seconds << "\n";
  if (!report.checkpoint.empty()) os << "# checkpoint: " << report.checkpoint << "\n";
  os << "epoch,loss,mean_rate,mean_speb,viol_speb_frac,viol_rate_frac\n";
  os << std::setprecision(10);
  for (const auto& e : report.epochs) {
    os << e.epoch << ',' << e.loss << ',' << e.mean_rate << ',' << e.mean_speb << ','
       << e.viol_speb_frac << ',' << e.viol_rate_frac << "\n";
  }
}

std::uint64_t dataset_hash(const std::vector<ChannelSample>& data) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& s : data) {
    mix(s.H.data(), sizeof(cplx) * s.H.size());
    for (const auto& t : s.target_pos) mix(t.data(), sizeof(double) * 3);
    for (const auto& a : s.alphas) mix(a.data(), sizeof(cplx) * a.size());
  }
  return h;
}

namespace {

struct Snapshot {
  std::vector<RVec> params;
  nn::AdamW::State opt;
};

Snapshot take(const Model& m, const nn::AdamW& opt) {
  Snapshot s;
  for (const auto& t : m.params().tensors()) s.params.push_back(t.value);
  s.opt = opt.state();
  return s;
}

void restore(Model& m, nn::AdamW& opt, const Snapshot& s) {
  auto& ts = m.params().tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) ts[i].value = s.params[i];
  opt.set_state(s.opt);
}

struct EpochFailure {
  std::size_t batch;
  std::string term;
};

bool grads_finite(const Model& m) {
  for (const auto& t : m.params().tensors()) {
    if (!t.grad.allFinite()) return false;
  }
  return true;
}

}  // namespace

TrainReport train(Model& model, const std::vector<ChannelSample>& data, const TrainConfig& cfg,
                  TrainState& state, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training dataset is empty");
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig& sc = model.scenario();
  ProjectorCache cache;
  const LossContext ctx{&sc, cfg.gamma, cfg.r_min, &cache};

  std::vector<ChannelSample> noisy;
  if (cfg.perturbation) {
    noisy.reserve(data.size());
    for (const auto& s : data) noisy.push_back(perturb(s, *cfg.perturbation, sc));
  }
  const std::vector<ChannelSample>& inputs = cfg.perturbation ? noisy : data;
  const std::uint64_t clean_hash = dataset_hash(data);

  nn::AdamW& opt = state.optimizer;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;

  TrainReport report;
  report.meta = {{"seed", std::to_string(cfg.seed)},
                 {"epochs", std::to_string(cfg.epochs)},
                 {"batch_size", std::to_string(cfg.batch_size)},
                 {"lr", std::to_string(cfg.lr)},
                 {"weight_decay", std::to_string(cfg.weight_decay)},
                 {"rho1_slope", std::to_string(cfg.rho1_slope)},
                 {"rho2_slope", std::to_string(cfg.rho2_slope)},
                 {"r_min", std::to_string(cfg.r_min)},
                 {"speb_jitter", "1e-12 * tr(J) / 3"},
                 {"model", std::string(model_tag(model.kind()))}};
  {
    std::ostringstream g;
    g << std::setprecision(17) << cfg.gamma;
    report.meta.emplace_back("gamma", g.str());
  }
  if (cfg.perturbation) {
    std::ostringstream p;
    p << "csi_snr_db=" << cfg.perturbation->csi_snr_db;
    if (cfg.perturbation->pos_err) {
      p << " pos_err=[" << cfg.perturbation->pos_err->lo << "," << cfg.perturbation->pos_err->hi
        << ")";
    }
    report.meta.emplace_back("perturbation", p.str());
  }

  const std::size_t n = data.size();
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  bool halved = false;

  for (int epoch = std::max(1, state.next_epoch); epoch <= cfg.epochs; ++epoch) {
    const Penalty rho = penalty_schedule(epoch, cfg);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(cfg.seed, Stream::kShuffle, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    const Snapshot snap = take(model, opt);
    EpochRecord rec;
    std::optional<EpochFailure> failure;
    for (int attempt = 0; attempt < 2; ++attempt) {
      failure.reset();
      Accum acc;
      double max_excess = -std::numeric_limits<double>::infinity();
      for (std::size_t b0 = 0, bi = 0; b0 < n && !failure; b0 += B, ++bi) {
        const std::size_t b1 = std::min(n, b0 + B);
        const double inv_b = 1.0 / static_cast<double>(b1 - b0);
        model.params().zero_grad();
        for (std::size_t j = b0; j < b1; ++j) {
          const std::size_t i = order[j];
          std::unique_ptr<Tape> tape;
          const BeamformingMatrix P = model.forward(inputs[i], &tape);
          const RVec pw = per_bs_power(P);
          for (int m = 0; m < sc.N; ++m) max_excess = std::max(max_excess, pw[m] - sc.power_budget[m]);
          const SampleLoss sl = sample_loss(P, data[i], ctx);
          if (!std::isfinite(sl.sum_rate)) {
            failure = EpochFailure{bi, "rate"};
            break;
          }
          if (rho.rho1 > 0.0 && !std::isfinite(sl.speb_hinge)) {
            failure = EpochFailure{bi, "speb"};
            break;
          }
          acc.add(sl, rho, cfg.gamma, cfg.r_min);
          const CMat g = sample_loss_gradient(P, data[i], ctx, rho, sl);
          model.backward(*tape, g * inv_b);
        }
        if (failure) break;
        if (!grads_finite(model)) {
          failure = EpochFailure{bi, "gradient"};
          break;
        }
        opt.step(model.params());
      }
      if (!failure) {
        rec.epoch = epoch;
        rec.loss = acc.loss / acc.n;
        rec.mean_rate = acc.rate / acc.n;
        rec.mean_speb = acc.speb / std::max<std::size_t>(acc.n_speb, 1);
        rec.viol_speb_frac = acc.viol_s / std::max<std::size_t>(acc.n_speb, 1);
        rec.viol_rate_frac = acc.viol_r / std::max<std::size_t>(acc.n_users, 1);
        rec.max_power_excess = max_excess;
        if (std::isfinite(rec.loss)) break;
        failure = EpochFailure{(n + B - 1) / B - 1, "loss"};
      }
      if (attempt == 0 && !halved) {
        restore(model, opt, snap);
        halved = true;
        opt.lr *= 0.5;
        report.lr_halved = true;
        continue;
      }
      break;
    }
    if (failure) {
      throw NonFiniteLoss("non-finite " + failure->term + " at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(failure->batch),
                          failure->batch, failure->term);
    }
    if (dataset_hash(data) != clean_hash) throw Error("clean training samples were modified");
    report.epochs.push_back(rec);
    state.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(rec, model, state);
  }
  if (halved) report.meta.emplace_back("lr_halved", "1");
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

EvalResult evaluate_beams(const std::function<BeamformingMatrix(const ChannelSample&)>& rule,
                          const ScenarioConfig& cfg, const std::vector<ChannelSample>& data,
                          double gamma, double r_min) {
  if (data.empty()) throw ConfigError("evaluation dataset is empty");
  ProjectorCache cache;
  const LossContext ctx{&cfg, gamma, r_min, &cache};
  EvalResult r;
  Accum acc;
  r.max_power_excess = -std::numeric_limits<double>::infinity();
  for (const auto& s : data) {
    const BeamformingMatrix P = rule(s);
    const RVec pw = per_bs_power(P);
    for (int m = 0; m < cfg.N; ++m) r.max_power_excess = std::max(r.max_power_excess, pw[m] - cfg.power_budget[m]);
    const SampleLoss sl = sample_loss(P, s, ctx);
    acc.add(sl, {}, gamma, r_min);
    r.sum_rates.push_back(sl.sum_rate);
    r.speb.push_back(sl.speb.at(0));
  }
  r.mean_sum_rate = acc.rate / acc.n;
  r.mean_speb = acc.speb / std::max<std::size_t>(acc.n_speb, 1);
  r.viol_speb_frac = acc.viol_s / std::max<std::size_t>(acc.n_speb, 1);
  r.viol_rate_frac = acc.viol_r / std::max<std::size_t>(acc.n_users, 1);
  return r;
}

EvalResult evaluate(const Model& model, const std::vector<ChannelSample>& data, double gamma,
                    double r_min, const std::optional<PerturbationSpec>& perturbation) {
  const ScenarioConfig& cfg = model.scenario();
  if (perturbation) perturbation->validate();
  return evaluate_beams(
      [&](const ChannelSample& s) {
        return perturbation ? model.forward(perturb(s, *perturbation, cfg)) : model.forward(s);
      },
      cfg, data, gamma, r_min);
}

}  // namespace coisac
