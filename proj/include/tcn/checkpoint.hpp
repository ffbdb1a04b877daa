#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcn/data.hpp"
#include "tcn/model.hpp"
#include "tcn/pipeline.hpp"
#include "tcn/train.hpp"

namespace tcn {

/// Everything needed to rerun inference on raw CSV data.
struct Checkpoint {
  ModelGraph model;
  ModelConfig config;
  FeaturePipeline pipeline;
  std::vector<std::string> class_names;
  LabelColumn label_column = std::string("label");
  bool has_header = true;
  std::uint64_t seed = 0;
};

/// The "layers" array of a checkpoint.
nlohmann::json layers_to_json(const ModelGraph& model);
/// Rebuilds the model from a checkpoint document (kind, dims, layers).
ModelGraph model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Checkpoint& ckpt);
/// Throws ParseError on malformed documents and ShapeError when layer
/// shapes are inconsistent.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const TrainHistory& h);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace tcn
