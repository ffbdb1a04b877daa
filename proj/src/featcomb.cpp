#include "tcn/featcomb.hpp"

#include <limits>

#include "tcn/errors.hpp"

namespace tcn {

std::string_view to_string(Activation a) noexcept {
  return a == Activation::ReLU ? "relu" : "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "identity") return Activation::Identity;
  throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(CombinationApproach a) noexcept {
  return a == CombinationApproach::Multiplicative ? "mult" : "pairwise";
}

CombinationApproach approach_from_string(std::string_view name) {
  if (name == "mult" || name == "multiplicative") return CombinationApproach::Multiplicative;
  if (name == "pairwise" || name == "pairwise_sum") return CombinationApproach::PairwiseSum;
  throw ArgumentError("unknown combination approach '" + std::string(name) +
                      "' (expected mult or pairwise)");
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  unsigned __int128 result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays an integer at every step.
    result = result * (n - k + i) / i;
    if (result > kMax) return kMax;
  }
  return static_cast<std::uint64_t>(result);
}

void CombinationSpec::validate(std::size_t n) const {
  if (m == 0) throw ArgumentError("subset size m must be >= 1");
  if (m > n) {
    throw ArgumentError("m exceeds feature count (m=" + std::to_string(m) +
                        ", features=" + std::to_string(n) + ")");
  }
  if (approach == CombinationApproach::PairwiseSum && m < 2) {
    throw ArgumentError("pairwise combination requires m >= 2");
  }
  if (append_global_interaction && n < 2) {
    throw ArgumentError("global interaction requires at least 2 features");
  }
  const std::uint64_t count = binomial(n, m);
  if (count > max_combined) {
    throw CapacityError("C(" + std::to_string(n) + ", " + std::to_string(m) + ") = " +
                            std::to_string(count) + " combined features exceeds the cap of " +
                            std::to_string(max_combined),
                        count);
  }
}

std::size_t CombinationSpec::output_width(std::size_t n) const {
  std::size_t width = static_cast<std::size_t>(binomial(n, m));
  if (augment_original) width += n;
  if (append_global_interaction) width += 1;
  return width;
}

std::vector<Subset> enumerate_subsets(std::size_t n, std::size_t m, std::size_t max_combined) {
  CombinationSpec spec;
  spec.m = m;
  spec.max_combined = max_combined;
  spec.validate(n);

  std::vector<Subset> out;
  out.reserve(static_cast<std::size_t>(binomial(n, m)));
  Subset current(m);
  for (std::size_t i = 0; i < m; ++i) current[i] = i;
  while (true) {
    out.push_back(current);
    // Rightmost position that can still advance.
    std::size_t i = m;
    while (i > 0 && current[i - 1] == n - m + (i - 1)) --i;
    if (i == 0) break;
    ++current[i - 1];
    for (std::size_t j = i; j < m; ++j) current[j] = current[j - 1] + 1;
  }
  return out;
}

std::vector<double> combine_multiplicative(std::span<const double> x,
                                           std::span<const Subset> subsets) {
  std::vector<double> out(subsets.size());
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    double product = 1.0;
    for (std::size_t idx : subsets[k]) product *= x[idx];
    out[k] = product;
  }
  return out;
}

std::vector<double> combine_pairwise_sum(std::span<const double> x,
                                         std::span<const Subset> subsets) {
  std::vector<double> out(subsets.size());
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    const Subset& s = subsets[k];
    if (s.size() < 2) throw ArgumentError("pairwise combination requires m >= 2");
    double total = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b) total += x[s[a]] * x[s[b]];
    out[k] = total;
  }
  return out;
}

std::vector<double> combine(std::span<const double> x, std::span<const Subset> subsets,
                            CombinationApproach approach) {
  return approach == CombinationApproach::Multiplicative ? combine_multiplicative(x, subsets)
                                                         : combine_pairwise_sum(x, subsets);
}

std::vector<double> combine_backward(std::span<const double> x, std::span<const Subset> subsets,
                                     CombinationApproach approach,
                                     std::span<const double> upstream) {
  if (upstream.size() != subsets.size()) {
    throw ShapeError("combine_backward: upstream length " + std::to_string(upstream.size()) +
                     " != subset count " + std::to_string(subsets.size()));
  }
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    const Subset& s = subsets[k];
    for (std::size_t a = 0; a < s.size(); ++a) {
      double partial = approach == CombinationApproach::Multiplicative ? 1.0 : 0.0;
      for (std::size_t b = 0; b < s.size(); ++b) {
        if (b == a) continue;
        if (approach == CombinationApproach::Multiplicative) {
          partial *= x[s[b]];
        } else {
          partial += x[s[b]];
        }
      }
      grad[s[a]] += upstream[k] * partial;
    }
  }
  return grad;
}

double global_interaction(std::span<const double> x, Activation activation) {
  if (x.size() < 2) throw ArgumentError("global interaction requires at least 2 features");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) total += x[i] * x[j];
  return activate(activation, total);
}

Matrix apply_combination(const Matrix& x, const CombinationSpec& spec,
                         std::span<const Subset> subsets) {
  const std::size_t n = x.cols();
  const std::size_t width = subsets.size() + (spec.augment_original ? n : 0) +
                            (spec.append_global_interaction ? 1 : 0);
  Matrix out(x.rows(), width);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    const std::vector<double> combined = combine(row, subsets, spec.approach);
    auto dst = out.row(r);
    std::size_t col = 0;
    for (double v : combined) dst[col++] = v;
    if (spec.augment_original)
      for (double v : row) dst[col++] = v;
    if (spec.append_global_interaction) dst[col++] = global_interaction(row, Activation::Identity);
  }
  return out;
}

CombinedFeatures transform_dataset(const Matrix& x, const CombinationSpec& spec) {
  spec.validate(x.cols());
  CombinedFeatures out;
  out.spec = spec;
  out.n_original = x.cols();
  out.subsets = enumerate_subsets(x.cols(), spec.m, spec.max_combined);
  out.values = apply_combination(x, spec, out.subsets);
  return out;
}

std::vector<std::string> combined_feature_names(std::span<const Subset> subsets,
                                                const CombinationSpec& spec,
                                                std::span<const std::string> original_names) {
  std::vector<std::string> names;
  names.reserve(subsets.size() + original_names.size() + 1);
  for (const Subset& s : subsets) {
    std::string name = "comb";
    for (std::size_t idx : s) name += "_" + std::to_string(idx);
    names.push_back(std::move(name));
  }
  if (spec.augment_original) names.insert(names.end(), original_names.begin(), original_names.end());
  if (spec.append_global_interaction) names.emplace_back("global_interaction");
  return names;
}

}  // namespace tcn
