#include "tcn/cli.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>

#include "tcn/errors.hpp"
#include "tcn/featcomb.hpp"
#include "tcn/pipeline.hpp"

namespace tcn::cli {

using nlohmann::json;

namespace {

constexpr double kGradCheckThreshold = 1e-4;

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Collects type errors instead of stopping at the first one.
class Reader {
 public:
  Reader(const json& j, std::vector<std::string>& errors) : j_(j), errors_(errors) {}

  template <typename T>
  void read(const char* key, T& dst) {
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    const json& v = *it;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return fail(key, "a boolean");
      dst = v.get<bool>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) return fail(key, "a number");
      dst = v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) return fail(key, "a non-negative integer");
      dst = v.get<T>();
    } else {
      if (!v.is_string()) return fail(key, "a string");
      dst = v.get<std::string>();
    }
  }

  void fail(const char* key, const char* expected) {
    errors_.push_back("key '" + std::string(key) + "' must be " + expected);
  }

 private:
  const json& j_;
  std::vector<std::string>& errors_;
};

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += "\n  " + l;
  return s;
}

LabelColumn label_from_argument(const std::string& arg) {
  if (!arg.empty() && std::all_of(arg.begin(), arg.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return static_cast<std::size_t>(std::stoull(arg));
  }
  return arg;
}

json label_to_json(const std::optional<LabelColumn>& label) {
  if (!label) return nullptr;
  if (const auto* name = std::get_if<std::string>(&*label)) return *name;
  return std::get<std::size_t>(*label);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CapacityError*>(&e)) return kCapacity;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const ShapeError*>(&e)) {
    return kData;
  }
  return kUsage;
}

Dataset gradcheck_data(const RunConfig& cfg) {
  if (cfg.dataset) {
    if (!cfg.label_column) throw ConfigError("label_column is required when dataset is set");
    Dataset raw = load_csv(cfg.resolve(*cfg.dataset), *cfg.label_column, cfg.has_header);
    std::vector<std::size_t> head(std::min(cfg.gradcheck.samples, raw.size()));
    for (std::size_t i = 0; i < head.size(); ++i) head[i] = i;
    return raw.subset(head);
  }
  const auto& g = cfg.gradcheck;
  if (g.samples < 2 || g.features < 1 || g.classes < 2) {
    throw ConfigError("gradcheck toy needs >= 2 samples, >= 1 feature and >= 2 classes");
  }
  Rng rng(cfg.seed);
  Dataset ds;
  ds.features = Matrix(g.samples, g.features, rng_normal(rng, g.samples * g.features, 0.0, 1.0));
  for (std::size_t i = 0; i < g.samples; ++i) ds.labels.push_back(static_cast<int>(i % g.classes));
  for (std::size_t c = 0; c < g.classes; ++c) ds.class_names.push_back(std::to_string(c));
  for (std::size_t j = 0; j < g.features; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  return ds;
}

json metrics_block(const Metrics& m) { return to_json(m); }

int cmd_transform(const std::string& input, const std::string& output, const std::string& label,
                  bool no_header, const CombinationSpec& spec, std::ostream& out) {
  const Dataset raw = load_csv(input, label_from_argument(label), !no_header);
  const CombinedFeatures combined = transform_dataset(raw.features, spec);
  Dataset ds;
  ds.features = combined.values;
  ds.labels = raw.labels;
  ds.class_names = raw.class_names;
  ds.feature_names = combined_feature_names(combined.subsets, spec, raw.feature_names);
  write_csv(output, ds, raw.label_name);
  out << "wrote " << ds.size() << " rows x " << ds.n_features() << " features to " << output
      << '\n';
  return kOk;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::string> output_dir, std::ostream& out) {
  RunConfig cfg = load_run_config(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.model.seed = *seed;
    cfg.train.seed = *seed;
  }
  if (output_dir) cfg.output_dir = *output_dir;

  const auto start = std::chrono::steady_clock::now();
  TrainOutcome outcome = run_training(cfg);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto dir = cfg.resolve(cfg.output_dir);
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "checkpoint.json", outcome.checkpoint);
  json results;
  results["config"] = to_json(cfg);
  results["history"] = to_json(outcome.history);
  results["best_epoch"] = outcome.history.best_epoch;
  results["stopped_epoch"] = outcome.history.stopped_epoch;
  results["final_metrics"] = outcome.final_metrics;
  results["wall_time_seconds"] = wall;
  results["rng_algorithm"] = std::string(Rng::kAlgorithm);
  write_json(dir / "results.json", results);

  const json& fm = outcome.final_metrics;
  json summary = fm.contains("validation") ? fm["validation"] : fm["train"];
  out << json{{"validation", summary},
              {"best_epoch", outcome.history.best_epoch},
              {"stopped_epoch", outcome.history.stopped_epoch},
              {"output_dir", dir.string()}}
             .dump(2)
      << '\n';
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& input,
             const std::optional<std::string>& output, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Metrics m = evaluate_file(ckpt, input);
  const json j = metrics_block(m);
  if (output) write_json(*output, j);
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_gradcheck(const std::optional<std::string>& config_path, double corrupt,
                  std::ostream& out) {
  RunConfig cfg = config_path ? load_run_config(*config_path) : parse_run_config(json::object());
  const GradCheckOutcome g = run_gradcheck(cfg, corrupt);
  const bool passed = g.report.max_relative_error < kGradCheckThreshold;
  json per_layer(g.report.per_layer_type);
  out << json{{"model", std::string(to_string(cfg.kind))},
              {"parameters", g.parameter_count},
              {"h", cfg.gradcheck.h},
              {"per_layer_type", per_layer},
              {"max_relative_error", g.report.max_relative_error},
              {"threshold", kGradCheckThreshold},
              {"passed", passed}}
             .dump(2)
      << '\n';
  return passed ? kOk : kCheckFailed;
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "dataset",         "label_column",      "has_header",
      "output_dir",      "model",             "seed",
      "m",               "approach",          "max_combined",
      "augment_original", "append_global_interaction", "hidden1",
      "hidden2",         "n_residual_blocks", "dropout_rate",
      "use_batchnorm",   "learning_rate",     "batch_size",
      "max_epochs",      "l2_lambda",         "early_stop_patience",
      "val_fraction",    "beta1",             "beta2",
      "adam_epsilon",    "shuffle_each_epoch", "test_fraction",
      "gradcheck_samples", "gradcheck_features", "gradcheck_classes",
      "gradcheck_h"};
  return keys;
}

std::string suggest_key(std::string_view unknown) {
  std::string best;
  std::size_t best_distance = std::max<std::size_t>(2, unknown.size() / 3) + 1;
  for (const auto& key : known_config_keys()) {
    const std::size_t d = edit_distance(unknown, key);
    if (d < best_distance) {
      best_distance = d;
      best = key;
    }
  }
  return best;
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  std::vector<std::string> errors;
  const auto& keys = known_config_keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
    std::string msg = "unknown key '" + key + "'";
    if (auto hint = suggest_key(key); !hint.empty()) msg += " (did you mean '" + hint + "'?)";
    errors.push_back(std::move(msg));
  }

  RunConfig cfg;
  cfg.base_dir = base_dir;
  Reader r(j, errors);
  std::string dataset;
  if (j.contains("dataset")) {
    r.read("dataset", dataset);
    cfg.dataset = dataset;
  }
  if (auto it = j.find("label_column"); it != j.end()) {
    if (it->is_string()) {
      cfg.label_column = it->get<std::string>();
    } else if (it->is_number_unsigned()) {
      cfg.label_column = it->get<std::size_t>();
    } else {
      r.fail("label_column", "a column name or a non-negative index");
    }
  }
  r.read("has_header", cfg.has_header);
  r.read("output_dir", cfg.output_dir);
  std::string model = "tcn";
  r.read("model", model);
  try {
    cfg.kind = model_kind_from_string(model);
  } catch (const ArgumentError& e) {
    errors.push_back(std::string("key 'model': ") + e.what());
  }
  r.read("seed", cfg.seed);

  auto& spec = cfg.model.combination;
  r.read("m", spec.m);
  std::string approach = std::string(to_string(spec.approach));
  r.read("approach", approach);
  try {
    spec.approach = approach_from_string(approach);
  } catch (const ArgumentError& e) {
    errors.push_back(std::string("key 'approach': ") + e.what());
  }
  r.read("max_combined", spec.max_combined);
  r.read("augment_original", spec.augment_original);
  r.read("append_global_interaction", spec.append_global_interaction);

  r.read("hidden1", cfg.model.hidden1);
  r.read("hidden2", cfg.model.hidden2);
  r.read("n_residual_blocks", cfg.model.n_residual_blocks);
  r.read("dropout_rate", cfg.model.dropout_rate);
  r.read("use_batchnorm", cfg.model.use_batchnorm);

  auto& t = cfg.train;
  r.read("learning_rate", t.learning_rate);
  r.read("batch_size", t.batch_size);
  r.read("max_epochs", t.max_epochs);
  r.read("l2_lambda", t.l2_lambda);
  r.read("early_stop_patience", t.early_stop_patience);
  r.read("val_fraction", t.val_fraction);
  r.read("beta1", t.beta1);
  r.read("beta2", t.beta2);
  r.read("adam_epsilon", t.adam_epsilon);
  r.read("shuffle_each_epoch", t.shuffle_each_epoch);
  r.read("test_fraction", cfg.test_fraction);

  r.read("gradcheck_samples", cfg.gradcheck.samples);
  r.read("gradcheck_features", cfg.gradcheck.features);
  r.read("gradcheck_classes", cfg.gradcheck.classes);
  r.read("gradcheck_h", cfg.gradcheck.h);

  cfg.model.seed = cfg.seed;
  cfg.train.seed = cfg.seed;

  const auto check = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errors.push_back(std::string(what) + ": " + e.what());
    }
  };
  check("model settings", [&] { cfg.model.validate(); });
  check("training settings", [&] { cfg.train.validate(); });
  if (spec.m == 0) errors.push_back("key 'm' must be >= 1");
  if (spec.approach == CombinationApproach::PairwiseSum && spec.m < 2) {
    errors.push_back("key 'm' must be >= 2 for the pairwise approach");
  }
  if (!(cfg.test_fraction >= 0.0) || cfg.train.val_fraction + cfg.test_fraction >= 1.0) {
    errors.push_back("key 'test_fraction' must be >= 0 and leave a non-empty training share");
  }
  if (!(cfg.gradcheck.h > 0.0)) errors.push_back("key 'gradcheck_h' must be > 0");

  if (!errors.empty()) throw ConfigError("invalid configuration:" + join_lines(errors));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

json to_json(const RunConfig& cfg) {
  const auto& spec = cfg.model.combination;
  const auto& t = cfg.train;
  return {{"dataset", cfg.dataset ? json(*cfg.dataset) : json(nullptr)},
          {"label_column", label_to_json(cfg.label_column)},
          {"has_header", cfg.has_header},
          {"output_dir", cfg.output_dir},
          {"model", std::string(to_string(cfg.kind))},
          {"seed", cfg.seed},
          {"m", spec.m},
          {"approach", std::string(to_string(spec.approach))},
          {"max_combined", spec.max_combined},
          {"augment_original", spec.augment_original},
          {"append_global_interaction", spec.append_global_interaction},
          {"hidden1", cfg.model.hidden1},
          {"hidden2", cfg.model.hidden2},
          {"n_residual_blocks", cfg.model.n_residual_blocks},
          {"dropout_rate", cfg.model.dropout_rate},
          {"use_batchnorm", cfg.model.use_batchnorm},
          {"learning_rate", t.learning_rate},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"l2_lambda", t.l2_lambda},
          {"early_stop_patience", t.early_stop_patience},
          {"val_fraction", t.val_fraction},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_epsilon", t.adam_epsilon},
          {"shuffle_each_epoch", t.shuffle_each_epoch},
          {"test_fraction", cfg.test_fraction},
          {"gradcheck_samples", cfg.gradcheck.samples},
          {"gradcheck_features", cfg.gradcheck.features},
          {"gradcheck_classes", cfg.gradcheck.classes},
          {"gradcheck_h", cfg.gradcheck.h}};
}

TrainOutcome run_training(const RunConfig& cfg) {
  if (!cfg.dataset || !cfg.label_column) {
    std::vector<std::string> missing;
    if (!cfg.dataset) missing.push_back("missing required key 'dataset'");
    if (!cfg.label_column) missing.push_back("missing required key 'label_column'");
    throw ConfigError("invalid configuration:" + join_lines(missing));
  }
  const Dataset raw = load_csv(cfg.resolve(*cfg.dataset), *cfg.label_column, cfg.has_header);
  if (raw.n_classes() < 2) throw ArgumentError("training data must contain at least 2 classes");

  Rng split_rng(cfg.seed);
  const SplitFractions fractions{1.0 - cfg.train.val_fraction - cfg.test_fraction,
                                 cfg.train.val_fraction, cfg.test_fraction};
  const DatasetSplit parts = stratified_split(raw, fractions, split_rng);

  TrainOutcome outcome;
  Checkpoint& ckpt = outcome.checkpoint;
  ckpt.pipeline = fit_pipeline(parts.train, cfg.kind, cfg.model.combination);
  ckpt.config = cfg.model;
  ckpt.class_names = raw.class_names;
  ckpt.label_column = *cfg.label_column;
  ckpt.has_header = cfg.has_header;
  ckpt.seed = cfg.seed;

  const Dataset train = ckpt.pipeline.apply(parts.train);
  const Dataset val = ckpt.pipeline.apply(parts.val);
  ckpt.model = build_model(cfg.kind, ckpt.pipeline.output_width(), raw.n_classes(), cfg.model);
  outcome.history = train_loop(ckpt.model, train, val, cfg.train);

  json& fm = outcome.final_metrics;
  fm["train"] = metrics_block(evaluate(ckpt.model, ckpt.pipeline.apply(raw)));
  if (val.size() > 0) fm["validation"] = metrics_block(evaluate(ckpt.model, val));
  if (parts.test.size() > 0) {
    fm["test"] = metrics_block(evaluate(ckpt.model, ckpt.pipeline.apply(parts.test)));
  }
  return outcome;
}

Metrics evaluate_file(const Checkpoint& ckpt, const std::filesystem::path& csv) {
  const Dataset raw = load_csv(csv, ckpt.label_column, ckpt.has_header);
  Dataset aligned = align_columns(raw, ckpt.pipeline.input_names);
  for (int& y : aligned.labels) {
    const std::string& name = raw.class_names[static_cast<std::size_t>(y)];
    auto it = std::find(ckpt.class_names.begin(), ckpt.class_names.end(), name);
    if (it == ckpt.class_names.end()) {
      throw SchemaError("label '" + name + "' is not one of the checkpoint's classes");
    }
    y = static_cast<int>(it - ckpt.class_names.begin());
  }
  aligned.class_names = ckpt.class_names;
  return evaluate(ckpt.model, ckpt.pipeline.apply(aligned));
}

GradCheckOutcome run_gradcheck(const RunConfig& cfg, double corrupt) {
  const Dataset raw = gradcheck_data(cfg);
  if (raw.n_classes() < 2) throw ArgumentError("gradcheck data must contain at least 2 classes");
  const FeaturePipeline pipeline = fit_pipeline(raw, cfg.kind, cfg.model.combination);
  const Dataset data = pipeline.apply(raw);
  ModelGraph model = build_model(cfg.kind, pipeline.output_width(), raw.n_classes(), cfg.model);
  GradCheckOptions options;
  options.h = cfg.gradcheck.h;
  options.corrupt_first_gradient = corrupt;
  GradCheckOutcome outcome;
  outcome.parameter_count = model.parameter_count();
  outcome.report = grad_check_report(model, data.features, data.labels, options);
  return outcome;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Twisted convolutional network toolkit"};
  app.require_subcommand(1);

  std::string input, output, label, checkpoint, config;
  std::optional<std::string> opt_output, opt_config;
  std::optional<std::uint64_t> seed;
  bool no_header = false;
  CombinationSpec spec;
  std::string approach = "mult";
  double corrupt = 0.0;

  auto* transform = app.add_subcommand("transform", "write the combined-feature CSV");
  transform->add_option("--input", input, "input CSV")->required();
  transform->add_option("--output", output, "output CSV")->required();
  transform->add_option("--label-column", label, "label column name or zero-based index")
      ->required();
  transform->add_option("--m", spec.m, "subset size")->capture_default_str();
  transform->add_option("--approach", approach, "mult or pairwise")
      ->check(CLI::IsMember({"mult", "pairwise"}))
      ->capture_default_str();
  transform->add_option("--max-combined", spec.max_combined, "cap on C(n, m)")
      ->capture_default_str();
  transform->add_flag("--augment-original", spec.augment_original, "append the original features");
  transform->add_flag("--append-global-interaction", spec.append_global_interaction,
                      "append the global pairwise interaction column");
  transform->add_flag("--no-header", no_header, "input has no header row");

  auto* train = app.add_subcommand("train", "train a model from a JSON config");
  train->add_option("--config", config, "run configuration JSON")->required();
  train->add_option("--seed", seed, "override the configured seed");
  train->add_option("--output", opt_output, "override the output directory");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a CSV file");
  eval->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  eval->add_option("--input", input, "CSV with the checkpoint's columns")->required();
  eval->add_option("--output", opt_output, "also write the metrics JSON here");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--config", opt_config, "run configuration JSON (defaults: TCN toy)");
  gradcheck->add_option("--corrupt-gradient", corrupt)->group("");

  for (auto* sub : {transform, train, eval, gradcheck}) sub->allow_windows_style_options(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*transform) {
      spec.approach = approach_from_string(approach);
      return cmd_transform(input, output, label, no_header, spec, out);
    }
    if (*train) return cmd_train(config, seed, opt_output, out);
    if (*eval) return cmd_eval(checkpoint, input, opt_output, out);
    return cmd_gradcheck(opt_config, corrupt, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace tcn::cli
