#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcn/data.hpp"
#include "tcn/featcomb.hpp"
#include "tcn/model.hpp"

namespace tcn {

/// Raw features -> optional combination -> z-score. The statistics are fitted
/// on the combined training features, so normalization sits at the network
/// input.
struct FeaturePipeline {
  std::vector<std::string> input_names;
  bool combine = false;
  CombinationSpec spec;
  std::vector<Subset> subsets;
  NormStats norm;

  std::size_t output_width() const noexcept { return norm.mean.size(); }
  std::vector<std::string> output_names() const;
  Matrix apply(const Matrix& raw) const;
  Dataset apply(const Dataset& raw) const;
};

/// Combination is applied for the TCN only; baselines see raw features.
FeaturePipeline fit_pipeline(const Dataset& train_raw, ModelKind kind, const CombinationSpec& spec);

/// Reorders the columns of `raw` to match `expected` by name. Throws
/// SchemaError listing missing and unexpected columns.
Dataset align_columns(const Dataset& raw, std::span<const std::string> expected);

}  // namespace tcn
