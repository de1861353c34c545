// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coisac/model.hpp"

namespace coisac {

using MetaList = std::vector<std::pair<std::string, std::string>>;

// Contents of a checkpoint file ("CICK"): model tag and schedule, scenario,
// relation list, metadata, then every parameter tensor as little-endian
// float32. Optimizer moments, when present, follow as float64.
struct Checkpoint {
  ModelConfig model;
  ScenarioConfig scenario;
  std::vector<std::string> relations;
  MetaList meta;
  std::vector<nn::Tensor> tensors;  // values only; grad left empty
  std::optional<nn::AdamW::State> optimizer;

  // Value of a metadata key, or nullopt.
  std::optional<std::string> find_meta(const std::string& key) const;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Model& model, const MetaList& meta,
                     const nn::AdamW* optimizer = nullptr);
// Throws MissingArtifact when the file is absent and FormatError when it is
// malformed or truncated.
Checkpoint read_checkpoint(const std::filesystem::path& path);
// Rebuilds the model and loads its parameters (rounded to float32 as
// stored). Throws FormatError on name, shape or relation mismatches.
std::unique_ptr<Model> restore_model(const Checkpoint& ckpt);

// Writes the parameters of `model` rounded to float32, as a save/load cycle
// would leave them.
void round_params_to_f32(Model& model);

}  // namespace coisac
