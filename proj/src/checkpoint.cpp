// SPDX-License-Identifier: Apache-2.0
#include "coisac/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "coisac/binary_io.hpp"

namespace coisac {

namespace {

constexpr char kMagic[4] = {'C', 'I', 'C', 'K'};
constexpr std::uint32_t kMaxCount = 1u << 20;

void put_ints(io::Writer& w, const std::vector<int>& v) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
  for (int x : v) w.put<std::int32_t>(x);
}

std::vector<int> get_ints(io::Reader& r) {
  const auto n = r.get<std::uint32_t>();
  if (n > kMaxCount) throw FormatError("integer list too long");
  std::vector<int> v(n);
  for (auto& x : v) x = r.get<std::int32_t>();
  return v;
}

std::uint32_t get_count(io::Reader& r, const char* what) {
  const auto n = r.get<std::uint32_t>();
  if (n > kMaxCount) throw FormatError(std::string(what) + " count out of range");
  return n;
}

}  // namespace

std::optional<std::string> Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const MetaList& meta,
                     const nn::AdamW* optimizer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  io::Writer w(os);
  const ModelConfig& mc = model.config();
  const ScenarioConfig& cfg = model.scenario();
  w.raw(kMagic, 4);
  w.put<std::uint16_t>(kCheckpointVersion);
  w.str(std::string(model_tag(model.kind())));
  for (int v : {cfg.N, cfg.K, cfg.Z, cfg.L()}) w.put<std::int32_t>(v);
  put_ints(w, mc.widths);
  for (int v : {mc.head_hidden, mc.conv_channels1, mc.conv_channels2, mc.conv_kernel, mc.fc_hidden}) {
    w.put<std::int32_t>(v);
  }
  w.put<std::uint8_t>(model.kind() == ModelKind::kLhgnn || model.kind() == ModelKind::kHomoGnn);
  const auto rels = model.relation_names();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(rels.size()));
  for (const auto& r : rels) w.str(r);
  w.str(scenario_to_yaml(cfg));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  const auto& ts = model.params().tensors();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) {
    w.str(t.name);
    put_ints(w, t.shape);
    for (Eigen::Index i = 0; i < t.value.size(); ++i) w.put<float>(static_cast<float>(t.value[i]));
  }
  const bool has_opt = optimizer != nullptr && optimizer->steps() > 0;
  w.put<std::uint8_t>(has_opt);
  if (has_opt) {
    const auto st = optimizer->state();
    if (st.m.size() != ts.size() || st.v.size() != ts.size()) {
      throw DimensionError("optimizer state does not match the parameter set");
    }
    w.put<std::int64_t>(st.t);
    for (const auto* moments : {&st.m, &st.v}) {
      for (const auto& m : *moments) {
        for (Eigen::Index i = 0; i < m.size(); ++i) w.put<double>(m[i]);
      }
    }
  }
  if (!w.ok()) throw Error("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact("checkpoint not found: " + path.string());
  io::Reader r(is);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + " is not a checkpoint");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  try {
    c.model.kind = parse_model_tag(r.str());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  int dims[4];
  for (int& d : dims) d = r.get<std::int32_t>();
  c.model.widths = get_ints(r);
  c.model.head_hidden = r.get<std::int32_t>();
  c.model.conv_channels1 = r.get<std::int32_t>();
  c.model.conv_channels2 = r.get<std::int32_t>();
  c.model.conv_kernel = r.get<std::int32_t>();
  c.model.fc_hidden = r.get<std::int32_t>();
  r.get<std::uint8_t>();  // attention flag, implied by the tag
  const auto n_rel = get_count(r, "relation");
  for (std::uint32_t i = 0; i < n_rel; ++i) c.relations.push_back(r.str());
  try {
    c.scenario = parse_scenario(r.str(1u << 24));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("embedded scenario: ") + e.what());
  }
  if (c.scenario.N != dims[0] || c.scenario.K != dims[1] || c.scenario.Z != dims[2] ||
      c.scenario.L() != dims[3]) {
    throw FormatError("header dimensions disagree with the embedded scenario");
  }
  const auto n_meta = get_count(r, "metadata");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    std::string v = r.str(1u << 24);
    c.meta.emplace_back(std::move(k), std::move(v));
  }
  const auto n_t = get_count(r, "tensor");
  for (std::uint32_t i = 0; i < n_t; ++i) {
    nn::Tensor t;
    t.name = r.str();
    t.shape = get_ints(r);
    std::int64_t size = 1;
    for (int d : t.shape) {
      if (d < 0) throw FormatError("negative tensor dimension");
      size *= d;
      if (size > (1ll << 31)) throw FormatError("tensor too large");
    }
    t.value.resize(size);
    for (std::int64_t j = 0; j < size; ++j) t.value[j] = r.get<float>();
    c.tensors.push_back(std::move(t));
  }
  if (r.get<std::uint8_t>()) {
    nn::AdamW::State st;
    st.t = r.get<std::int64_t>();
    for (auto* moments : {&st.m, &st.v}) {
      for (const auto& t : c.tensors) {
        RVec m(t.value.size());
        for (Eigen::Index j = 0; j < m.size(); ++j) m[j] = r.get<double>();
        moments->push_back(std::move(m));
      }
    }
    c.optimizer = std::move(st);
  }
  if (!r.at_eof()) throw FormatError("trailing bytes after checkpoint payload");
  return c;
}

std::unique_ptr<Model> restore_model(const Checkpoint& c) {
  std::unique_ptr<Model> m = make_model(c.model, c.scenario, 0);
  if (m->relation_names() != c.relations) throw FormatError("relation list does not match the model");
  auto& ts = m->params().tensors();
  if (ts.size() != c.tensors.size()) throw FormatError("tensor count does not match the model");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].name != c.tensors[i].name || ts[i].shape != c.tensors[i].shape) {
      throw FormatError("tensor " + c.tensors[i].name + " does not match the model layout");
    }
    ts[i].value = c.tensors[i].value;
  }
  return m;
}

void round_params_to_f32(Model& model) {
  for (auto& t : model.params().tensors()) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      t.value[i] = static_cast<double>(static_cast<float>(t.value[i]));
    }
  }
}

}  // namespace coisac
