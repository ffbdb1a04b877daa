#include "tcn/pipeline.hpp"

#include <algorithm>
#include <unordered_map>

#include "tcn/errors.hpp"

namespace tcn {

std::vector<std::string> FeaturePipeline::output_names() const {
  if (!combine) return input_names;
  return combined_feature_names(subsets, spec, input_names);
}

Matrix FeaturePipeline::apply(const Matrix& raw) const {
  if (raw.cols() != input_names.size()) {
    throw ShapeError("pipeline expects " + std::to_string(input_names.size()) +
                     " raw features, got " + raw.shape_string());
  }
  if (!combine) return zscore_apply(raw, norm);
  return zscore_apply(apply_combination(raw, spec, subsets), norm);
}

Dataset FeaturePipeline::apply(const Dataset& raw) const {
  Dataset out;
  out.features = apply(raw.features);
  out.labels = raw.labels;
  out.class_names = raw.class_names;
  out.feature_names = output_names();
  out.norm_stats = norm;
  out.label_name = raw.label_name;
  return out;
}

FeaturePipeline fit_pipeline(const Dataset& train_raw, ModelKind kind,
                             const CombinationSpec& spec) {
  FeaturePipeline p;
  p.input_names = train_raw.feature_names;
  p.combine = kind == ModelKind::TCN;
  p.spec = spec;
  if (p.combine) {
    CombinedFeatures combined = transform_dataset(train_raw.features, spec);
    p.subsets = std::move(combined.subsets);
    p.norm = zscore_fit(combined.values);
  } else {
    p.norm = zscore_fit(train_raw.features);
  }
  return p;
}

Dataset align_columns(const Dataset& raw, std::span<const std::string> expected) {
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t j = 0; j < raw.feature_names.size(); ++j) position[raw.feature_names[j]] = j;

  std::vector<std::string> missing;
  std::vector<std::size_t> source;
  for (const auto& name : expected) {
    auto it = position.find(name);
    if (it == position.end()) {
      missing.push_back(name);
    } else {
      source.push_back(it->second);
    }
  }
  std::vector<std::string> extra;
  for (const auto& name : raw.feature_names)
    if (std::find(expected.begin(), expected.end(), name) == expected.end()) extra.push_back(name);

  if (!missing.empty() || !extra.empty()) {
    const auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
      return s.empty() ? std::string("none") : s;
    };
    throw SchemaError("feature columns do not match the checkpoint; missing: " + join(missing) +
                      "; unexpected: " + join(extra));
  }

  Dataset out = raw;
  out.feature_names.assign(expected.begin(), expected.end());
  for (std::size_t i = 0; i < raw.features.rows(); ++i)
    for (std::size_t j = 0; j < source.size(); ++j) out.features(i, j) = raw.features(i, source[j]);
  return out;
}

}  // namespace tcn
