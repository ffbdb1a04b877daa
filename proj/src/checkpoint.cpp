#include "tcn/checkpoint.hpp"

#include <fstream>

#include "tcn/errors.hpp"

namespace tcn {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(json(std::vector<double>(r.begin(), r.end())));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("matrix block must be a nested array");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.front().size();
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) throw ParseError("ragged matrix block");
    for (const auto& v : row) data.push_back(v.get<double>());
  }
  return Matrix(rows, cols, std::move(data));
}

json layer_to_json(const Layer& layer) {
  json j;
  j["type"] = std::string(layer_type_name(layer));
  std::visit(
      [&](const auto& l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, DenseLayer>) {
          j["shape"] = {l.output_dim(), l.input_dim()};
          j["activation"] = std::string(to_string(l.activation));
          j["values"] = {matrix_to_json(l.weights), matrix_to_json(l.bias)};
        } else if constexpr (std::is_same_v<L, ResidualBlock>) {
          j["shape"] = {l.dim(), l.dim()};
          j["values"] = {matrix_to_json(l.w1), matrix_to_json(l.b1), matrix_to_json(l.w2),
                         matrix_to_json(l.b2)};
        } else if constexpr (std::is_same_v<L, BatchNormLayer>) {
          j["shape"] = {l.dim()};
          j["momentum"] = l.momentum;
          j["epsilon"] = l.epsilon;
          j["values"] = {matrix_to_json(l.gamma), matrix_to_json(l.beta),
                         matrix_to_json(l.running_mean), matrix_to_json(l.running_var)};
        } else if constexpr (std::is_same_v<L, ReluLayer>) {
          j["shape"] = json::array();
          j["values"] = json::array();
        } else if constexpr (std::is_same_v<L, DropoutLayer>) {
          j["shape"] = json::array();
          j["rate"] = l.rate;
          j["values"] = json::array();
        } else if constexpr (std::is_same_v<L, Conv1DLayer>) {
          j["shape"] = {l.n_kernels(), l.width()};
          j["stride"] = l.stride;
          j["values"] = {matrix_to_json(l.kernels), matrix_to_json(l.bias)};
        }
      },
      layer);
  return j;
}

const json& block(const json& j, std::size_t k) {
  const json& values = j.at("values");
  if (!values.is_array() || values.size() <= k) throw ParseError("layer is missing value blocks");
  return values[k];
}

Layer layer_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "dense") {
    DenseLayer d;
    d.weights = matrix_from_json(block(j, 0));
    d.bias = matrix_from_json(block(j, 1));
    d.activation = activation_from_string(j.at("activation").get<std::string>());
    return d;
  }
  if (type == "residual") {
    return ResidualBlock{matrix_from_json(block(j, 0)), matrix_from_json(block(j, 1)),
                         matrix_from_json(block(j, 2)), matrix_from_json(block(j, 3))};
  }
  if (type == "batchnorm") {
    BatchNormLayer b;
    b.gamma = matrix_from_json(block(j, 0));
    b.beta = matrix_from_json(block(j, 1));
    b.running_mean = matrix_from_json(block(j, 2));
    b.running_var = matrix_from_json(block(j, 3));
    b.momentum = j.at("momentum").get<double>();
    b.epsilon = j.at("epsilon").get<double>();
    return b;
  }
  if (type == "relu") return ReluLayer{};
  if (type == "dropout") return DropoutLayer{j.at("rate").get<double>()};
  if (type == "conv1d") {
    return Conv1DLayer{matrix_from_json(block(j, 0)), matrix_from_json(block(j, 1)),
                       j.at("stride").get<std::size_t>()};
  }
  throw ParseError("unknown layer type '" + type + "'");
}

json combination_to_json(const CombinationSpec& s, bool enabled) {
  return {{"enabled", enabled},
          {"m", s.m},
          {"approach", std::string(to_string(s.approach))},
          {"max_combined", s.max_combined},
          {"augment_original", s.augment_original},
          {"append_global_interaction", s.append_global_interaction}};
}

CombinationSpec combination_from_json(const json& j) {
  CombinationSpec s;
  s.m = j.at("m").get<std::size_t>();
  s.approach = approach_from_string(j.at("approach").get<std::string>());
  s.max_combined = j.at("max_combined").get<std::size_t>();
  s.augment_original = j.at("augment_original").get<bool>();
  s.append_global_interaction = j.at("append_global_interaction").get<bool>();
  return s;
}

}  // namespace

json layers_to_json(const ModelGraph& model) {
  json layers = json::array();
  for (const auto& l : model.layers) layers.push_back(layer_to_json(l));
  return layers;
}

ModelGraph model_from_json(const json& j) {
  ModelGraph g;
  g.kind = model_kind_from_string(j.at("kind").get<std::string>());
  g.input_dim = j.at("input_dim").get<std::size_t>();
  g.n_classes = j.at("n_classes").get<std::size_t>();
  for (const auto& l : j.at("layers")) g.layers.push_back(layer_from_json(l));
  g.validate();
  return g;
}

json to_json(const Checkpoint& c) {
  json j;
  j["kind"] = std::string(to_string(c.model.kind));
  j["input_dim"] = c.model.input_dim;
  j["n_classes"] = c.model.n_classes;
  j["config"] = {{"hidden1", c.config.hidden1},
                 {"hidden2", c.config.hidden2},
                 {"n_residual_blocks", c.config.n_residual_blocks},
                 {"dropout_rate", c.config.dropout_rate},
                 {"use_batchnorm", c.config.use_batchnorm},
                 {"seed", c.config.seed}};
  j["combination"] = combination_to_json(c.pipeline.spec, c.pipeline.combine);
  j["subsets"] = c.pipeline.subsets;
  j["normalization_stats"] = {{"mean", c.pipeline.norm.mean}, {"std", c.pipeline.norm.stddev}};
  j["feature_names"] = c.pipeline.input_names;
  j["class_names"] = c.class_names;
  if (const auto* name = std::get_if<std::string>(&c.label_column)) {
    j["label_column"] = *name;
  } else {
    j["label_column"] = std::get<std::size_t>(c.label_column);
  }
  j["has_header"] = c.has_header;
  j["layers"] = layers_to_json(c.model);
  j["rng_algorithm"] = std::string(Rng::kAlgorithm);
  j["seed"] = c.seed;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    Checkpoint c;
    c.model = model_from_json(j);
    const json& cfg = j.at("config");
    c.config.hidden1 = cfg.at("hidden1").get<std::size_t>();
    c.config.hidden2 = cfg.at("hidden2").get<std::size_t>();
    c.config.n_residual_blocks = cfg.at("n_residual_blocks").get<std::size_t>();
    c.config.dropout_rate = cfg.at("dropout_rate").get<double>();
    c.config.use_batchnorm = cfg.at("use_batchnorm").get<bool>();
    c.config.seed = cfg.at("seed").get<std::uint64_t>();
    c.pipeline.spec = combination_from_json(j.at("combination"));
    c.config.combination = c.pipeline.spec;
    c.pipeline.combine = j.at("combination").at("enabled").get<bool>();
    c.pipeline.subsets = j.at("subsets").get<std::vector<Subset>>();
    c.pipeline.norm.mean = j.at("normalization_stats").at("mean").get<std::vector<double>>();
    c.pipeline.norm.stddev = j.at("normalization_stats").at("std").get<std::vector<double>>();
    c.pipeline.input_names = j.at("feature_names").get<std::vector<std::string>>();
    c.class_names = j.at("class_names").get<std::vector<std::string>>();
    const json& label = j.at("label_column");
    if (label.is_string()) {
      c.label_column = label.get<std::string>();
    } else {
      c.label_column = label.get<std::size_t>();
    }
    c.has_header = j.at("has_header").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (c.pipeline.output_width() != c.model.input_dim) {
      throw ShapeError("normalization statistics do not match the model input width");
    }
    if (c.class_names.size() != c.model.n_classes) {
      throw ShapeError("class_names do not match the model's class count");
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_json(path, to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"mean_loss", m.mean_loss}, {"confusion", m.confusion}};
}

json to_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy}});
  }
  return epochs;
}

}  // namespace tcn
