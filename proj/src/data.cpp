#include "tcn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "tcn/errors.hpp"

namespace tcn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const auto cell = trim(line.substr(start, comma == std::string_view::npos ? line.npos
                                                                               : comma - start));
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = gather_rows(features, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.class_names = class_names;
  out.feature_names = feature_names;
  out.norm_stats = norm_stats;
  out.label_name = label_name;
  return out;
}

void Dataset::validate() const {
  if (labels.size() != features.rows()) {
    throw ArgumentError("dataset has " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(features.rows()) + " rows");
  }
  if (feature_names.size() != features.cols()) {
    throw ArgumentError("dataset has " + std::to_string(feature_names.size()) +
                        " feature names for " + std::to_string(features.cols()) + " columns");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_names.size()) {
      throw ArgumentError("label " + std::to_string(y) + " outside the class list");
    }
  }
  if (norm_stats) {
    for (double s : norm_stats->stddev)
      if (!(s > 0.0)) throw ArgumentError("normalization std entries must be positive");
  }
}

Dataset load_csv(const std::filesystem::path& path, const LabelColumn& label_column,
                 bool has_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (line.find('"') != std::string::npos) {
      throw ParseError("row " + std::to_string(line_no) + ": quoted cells are not supported");
    }
    rows.push_back(split_line(line));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ParseError("'" + path.string() + "' contains no rows");

  const std::size_t n_cols = rows.front().size();
  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (has_header) {
    header = rows.front();
    first_data = 1;
  } else {
    for (std::size_t c = 0; c < n_cols; ++c) header.push_back("x" + std::to_string(c));
  }

  std::size_t label_idx = 0;
  if (const auto* name = std::get_if<std::string>(&label_column)) {
    if (!has_header) throw SchemaError("label column '" + *name + "' given by name but file has no header");
    auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) throw SchemaError("missing label column '" + *name + "'");
    label_idx = static_cast<std::size_t>(it - header.begin());
  } else {
    label_idx = std::get<std::size_t>(label_column);
    if (label_idx >= n_cols) {
      throw SchemaError("missing label column: index " + std::to_string(label_idx) + " but only " +
                        std::to_string(n_cols) + " columns");
    }
  }

  Dataset ds;
  if (has_header) ds.label_name = header[label_idx];
  for (std::size_t c = 0; c < n_cols; ++c)
    if (c != label_idx) ds.feature_names.push_back(header[c]);
  if (!has_header) {
    // Renumber so headerless feature names are contiguous.
    for (std::size_t c = 0; c < ds.feature_names.size(); ++c) ds.feature_names[c] = "x" + std::to_string(c);
  }

  const std::size_t n_samples = rows.size() - first_data;
  ds.features = Matrix(n_samples, n_cols - 1);
  std::unordered_map<std::string, int> encoding;
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    const std::size_t sample = r - first_data;
    if (cells.size() != n_cols) {
      throw ParseError("row " + std::to_string(line_numbers[r]) + ": expected " +
                       std::to_string(n_cols) + " cells, found " + std::to_string(cells.size()));
    }
    std::size_t f = 0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (c == label_idx) continue;
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw ParseError("row " + std::to_string(line_numbers[r]) + ", column " + header[c] +
                         ": cannot parse '" + cells[c] + "' as a number");
      }
      ds.features(sample, f++) = v;
    }
    const std::string& label = cells[label_idx];
    auto [it, inserted] = encoding.try_emplace(label, static_cast<int>(ds.class_names.size()));
    if (inserted) ds.class_names.push_back(label);
    ds.labels.push_back(it->second);
  }
  return ds;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const Dataset& ds,
               const std::string& label_header) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& name : ds.feature_names) out << name << ',';
  out << label_header << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.features.row(i)) out << format_double(v) << ',';
    out << ds.class_names.at(static_cast<std::size_t>(ds.labels[i])) << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

NormStats zscore_fit(const Matrix& features) {
  const std::size_t n = features.cols();
  NormStats stats{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (features.rows() == 0) throw ArgumentError("zscore_fit: no samples");
  const double inv = 1.0 / static_cast<double>(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) stats.mean[j] += features(i, j);
  for (double& m : stats.mean) m *= inv;
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = features(i, j) - stats.mean[j];
      stats.stddev[j] += d * d;
    }
  for (double& s : stats.stddev) {
    s = std::sqrt(s * inv);
    if (s < 1e-12) s = 1.0;
  }
  return stats;
}

NormStats zscore_fit(const Dataset& train) { return zscore_fit(train.features); }

Matrix zscore_apply(const Matrix& features, const NormStats& stats) {
  if (stats.mean.size() != features.cols() || stats.stddev.size() != features.cols()) {
    throw ShapeError("zscore_apply: statistics for " + std::to_string(stats.mean.size()) +
                     " features, data has " + features.shape_string());
  }
  Matrix out = features;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j)
      out(i, j) = (out(i, j) - stats.mean[j]) / stats.stddev[j];
  return out;
}

Dataset zscore_apply(const Dataset& ds, const NormStats& stats) {
  Dataset out = ds;
  out.features = zscore_apply(ds.features, stats);
  out.norm_stats = stats;
  return out;
}

SplitIndices stratified_split_indices(std::span<const int> labels, std::size_t n_classes,
                                      const SplitFractions& fractions, Rng& rng) {
  const std::array<double, 3> frac{fractions.train, fractions.val, fractions.test};
  double total = 0.0;
  for (double f : frac) {
    if (f < 0.0 || !std::isfinite(f)) throw ArgumentError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");
  const auto nonempty = static_cast<std::size_t>(std::count_if(frac.begin(), frac.end(),
                                                               [](double f) { return f > 0.0; }));

  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) throw ArgumentError("label out of range");
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }

  SplitIndices out;
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& members = by_class[c];
    const std::size_t count = members.size();
    if (count == 0) continue;
    if (count < nonempty) {
      throw ArgumentError("class " + std::to_string(c) + " has " + std::to_string(count) +
                          " samples but " + std::to_string(nonempty) + " splits need one each");
    }
    std::array<std::size_t, 3> alloc{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double quota = static_cast<double>(count) * frac[s];
      alloc[s] = static_cast<std::size_t>(std::floor(quota));
      remainder[s] = quota - std::floor(quota);
      assigned += alloc[s];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < count; k = (k + 1) % 3) {
      if (frac[order[k]] <= 0.0) continue;
      ++alloc[order[k]];
      ++assigned;
    }
    // Every requested split receives at least one member of each class.
    for (std::size_t s = 0; s < 3; ++s) {
      if (frac[s] <= 0.0 || alloc[s] > 0) continue;
      const auto donor = static_cast<std::size_t>(std::max_element(alloc.begin(), alloc.end()) -
                                                  alloc.begin());
      --alloc[donor];
      ++alloc[s];
    }

    rng.shuffle(std::span<std::size_t>(members));
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      out.parts[s].insert(out.parts[s].end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                          members.begin() + static_cast<std::ptrdiff_t>(pos + alloc[s]));
      pos += alloc[s];
    }
  }
  for (auto& part : out.parts) std::sort(part.begin(), part.end());
  return out;
}

DatasetSplit stratified_split(const Dataset& ds, const SplitFractions& fractions, Rng& rng) {
  const auto idx = stratified_split_indices(ds.labels, ds.n_classes(), fractions, rng);
  return {ds.subset(idx.parts[0]), ds.subset(idx.parts[1]), ds.subset(idx.parts[2])};
}

int interaction_label(std::span<const double> x, InteractionRule rule) {
  const std::size_t needed = rule == InteractionRule::ProductSign ? 2 : 3;
  if (x.size() < needed) throw ArgumentError("interaction_label: too few features");
  double product = x[0] * x[1];
  if (rule == InteractionRule::ThreeWayProductSign) product *= x[2];
  return product > 0.0 ? 1 : 0;
}

Dataset synth_interaction(std::size_t n_samples, std::size_t n_features, InteractionRule rule,
                          double noise_std, Rng& rng) {
  const std::size_t needed = rule == InteractionRule::ProductSign ? 2 : 3;
  if (n_features < needed) {
    throw ArgumentError("synth_interaction: rule needs at least " + std::to_string(needed) +
                        " features");
  }
  if (noise_std < 0.0) throw ArgumentError("synth_interaction: noise_std must be >= 0");
  Dataset ds;
  ds.features = Matrix(n_samples, n_features);
  ds.labels.resize(n_samples);
  ds.class_names = {"0", "1"};
  for (std::size_t j = 0; j < n_features; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n_samples; ++i) {
    auto row = ds.features.row(i);
    for (double& v : row) v = rng.normal();
    ds.labels[i] = interaction_label(row, rule);
    if (noise_std > 0.0)
      for (double& v : row) v += noise_std * rng.normal();
  }
  return ds;
}

}  // namespace tcn
