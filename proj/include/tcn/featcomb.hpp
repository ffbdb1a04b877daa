#pragma once

// Feature-combination layer: every m-subset of the input features is mapped
// to one new feature, either the product of its members or the sum of the
// products of every pair inside it. A separate global interaction term sums
// the pairwise products over the whole feature vector.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tcn/activation.hpp"
#include "tcn/matrix.hpp"

namespace tcn {

enum class CombinationApproach {
  Multiplicative,  ///< product of the subset members
  PairwiseSum,     ///< sum over pairs i<j inside the subset of x_i * x_j
};

std::string_view to_string(CombinationApproach a) noexcept;
/// Accepts "mult"/"multiplicative" and "pairwise"/"pairwise_sum".
CombinationApproach approach_from_string(std::string_view name);

struct CombinationSpec {
  std::size_t m = 2;
  CombinationApproach approach = CombinationApproach::Multiplicative;
  std::size_t max_combined = 100000;
  bool augment_original = false;
  bool append_global_interaction = false;

  /// Checks the spec against an input of `n` features, including the
  /// C(n, m) cap. Throws ArgumentError or CapacityError.
  void validate(std::size_t n) const;
  /// Number of output columns produced for `n` input features.
  std::size_t output_width(std::size_t n) const;

  bool operator==(const CombinationSpec&) const = default;
};

/// Strictly increasing feature positions.
using Subset = std::vector<std::size_t>;

struct CombinedFeatures {
  Matrix values;
  CombinationSpec spec;
  std::vector<Subset> subsets;
  std::size_t n_original = 0;
};

/// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept;

/// All C(n, m) subsets of {0..n-1} in lexicographic order. The cap is checked
/// before anything is allocated.
std::vector<Subset> enumerate_subsets(std::size_t n, std::size_t m,
                                      std::size_t max_combined = 100000);

std::vector<double> combine_multiplicative(std::span<const double> x,
                                           std::span<const Subset> subsets);
/// Throws ArgumentError for subsets with fewer than two members.
std::vector<double> combine_pairwise_sum(std::span<const double> x,
                                         std::span<const Subset> subsets);
std::vector<double> combine(std::span<const double> x, std::span<const Subset> subsets,
                            CombinationApproach approach);

/// Vector-Jacobian product of `combine` with respect to x. The
/// multiplicative partials are formed by multiplying the other members of
/// each subset, so zeros in x are handled exactly.
std::vector<double> combine_backward(std::span<const double> x, std::span<const Subset> subsets,
                                     CombinationApproach approach,
                                     std::span<const double> upstream);

/// f(sum_{i<j} x_i x_j) over all features. Requires at least two features.
double global_interaction(std::span<const double> x, Activation activation);

/// Row-wise combination of a batch. Column order: combined features in
/// subset order, then the originals (augment_original), then the global
/// interaction with identity activation (append_global_interaction).
CombinedFeatures transform_dataset(const Matrix& x, const CombinationSpec& spec);
/// Same, reusing an already enumerated subset list.
Matrix apply_combination(const Matrix& x, const CombinationSpec& spec,
                         std::span<const Subset> subsets);

/// Column names matching transform_dataset's layout: "comb_0_1", ...,
/// then the original names, then "global_interaction".
std::vector<std::string> combined_feature_names(std::span<const Subset> subsets,
                                                const CombinationSpec& spec,
                                                std::span<const std::string> original_names);

}  // namespace tcn
