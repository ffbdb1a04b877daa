#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tcn/matrix.hpp"
#include "tcn/rng.hpp"

namespace tcn {

/// Per-feature z-score statistics. `stddev` entries are strictly positive;
/// constant features carry the sentinel 1.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool operator==(const NormStats&) const = default;
};

struct Dataset {
  Matrix features;  ///< samples x n
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::optional<NormStats> norm_stats;
  std::string label_name = "label";  ///< header of the label column

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t n_features() const noexcept { return features.cols(); }
  std::size_t n_classes() const noexcept { return class_names.size(); }

  /// Rows at `indices`, in that order; names and stats are carried over.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Throws ArgumentError when the invariants do not hold.
  void validate() const;
};

/// Column name or zero-based index.
using LabelColumn = std::variant<std::string, std::size_t>;

/// Reads a comma-separated file. Labels are encoded in order of first
/// appearance. Headerless files get feature names "x0", "x1", ...
Dataset load_csv(const std::filesystem::path& path, const LabelColumn& label_column,
                 bool has_header = true);

/// Writes features followed by the label column (as class names), with a
/// header row. Values use shortest round-trip decimal formatting.
void write_csv(const std::filesystem::path& path, const Dataset& ds,
               const std::string& label_header = "label");

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

NormStats zscore_fit(const Matrix& features);
NormStats zscore_fit(const Dataset& train);
Matrix zscore_apply(const Matrix& features, const NormStats& stats);
/// Returns a copy of `ds` with normalized features and `norm_stats` set.
Dataset zscore_apply(const Dataset& ds, const NormStats& stats);

struct SplitFractions {
  double train = 0.8;
  double val = 0.0;
  double test = 0.2;
};

struct SplitIndices {
  std::array<std::vector<std::size_t>, 3> parts;  ///< train, val, test; each ascending
};

/// Per-class largest-remainder allocation, shuffled within class by `rng`.
SplitIndices stratified_split_indices(std::span<const int> labels, std::size_t n_classes,
                                      const SplitFractions& fractions, Rng& rng);

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

DatasetSplit stratified_split(const Dataset& ds, const SplitFractions& fractions, Rng& rng);

enum class InteractionRule {
  ProductSign,          ///< label = [x0 * x1 > 0]
  ThreeWayProductSign,  ///< label = [x0 * x1 * x2 > 0]
};

/// 1 when the product of the rule's leading features is positive, else 0.
int interaction_label(std::span<const double> x, InteractionRule rule);

/// Standard normal features labelled by `rule`; N(0, noise_std^2) noise is
/// added to the features after labelling.
Dataset synth_interaction(std::size_t n_samples, std::size_t n_features, InteractionRule rule,
                          double noise_std, Rng& rng);

}  // namespace tcn
