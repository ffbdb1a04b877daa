#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcn/checkpoint.hpp"
#include "tcn/data.hpp"
#include "tcn/model.hpp"
#include "tcn/train.hpp"

namespace tcn::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,     ///< bad flags or configuration
  kData = 2,      ///< unreadable or mismatched data
  kCapacity = 3,  ///< combination or model too large
  kCheckFailed = 4,
};

struct GradCheckSettings {
  std::size_t samples = 8;
  std::size_t features = 6;
  std::size_t classes = 3;
  double h = 1e-5;
};

/// Flat JSON run configuration. Every key is optional except `dataset` and
/// `label_column` for training; relative paths resolve against the
/// directory holding the config file.
struct RunConfig {
  std::optional<std::string> dataset;
  std::optional<LabelColumn> label_column;
  bool has_header = true;
  std::string output_dir = "tcn_run";
  ModelKind kind = ModelKind::TCN;
  ModelConfig model;
  TrainConfig train;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;
  GradCheckSettings gradcheck;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
};

/// Every key accepted in a run configuration.
const std::vector<std::string>& known_config_keys();
/// Closest known key within a small edit distance, or empty.
std::string suggest_key(std::string_view unknown);

/// Throws ConfigError listing every offending key.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved configuration, defaults included.
nlohmann::json to_json(const RunConfig& cfg);

struct TrainOutcome {
  Checkpoint checkpoint;
  TrainHistory history;
  nlohmann::json final_metrics;
};

/// Load, split, fit the feature pipeline on the training part, train, and
/// measure. "train" metrics cover the whole input file.
TrainOutcome run_training(const RunConfig& cfg);
/// Metrics of a checkpoint on a raw CSV file; columns are matched by name.
Metrics evaluate_file(const Checkpoint& ckpt, const std::filesystem::path& csv);

struct GradCheckOutcome {
  GradCheckReport report;
  std::size_t parameter_count = 0;
};

GradCheckOutcome run_gradcheck(const RunConfig& cfg, double corrupt = 0.0);

/// Entry point shared by the executable and tests. Data goes to `out`,
/// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tcn::cli
