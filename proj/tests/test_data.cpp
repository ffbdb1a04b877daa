#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "tcn/errors.hpp"
#include "tcn/data.hpp"
#include "test_support.hpp"

namespace tcn {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tcn_data_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << content;
    return p;
  }

  fs::path dir_;
};

using Csv = TempDir;

TEST_F(Csv, FirstAppearanceEncoding) {
  const auto p = write("a.csv", "f,y\n1,a\n2,b\n3,a\n");
  const Dataset ds = load_csv(p, std::string("y"));
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.features, (Matrix{{1.0}, {2.0}, {3.0}}));
}

TEST_F(Csv, HeaderNamesAndIndexLabel) {
  const auto p = write("h.csv", "x1,x2,y\n0.5,1e-3,c\n-2,3,d\n");
  const Dataset ds = load_csv(p, std::string("y"));
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"x1", "x2"}));
  EXPECT_EQ(ds.label_name, "y");
  EXPECT_EQ(ds.features(0, 1), 1e-3);

  const Dataset by_index = load_csv(write("h2.csv", "x1,x2,y\n0.5,1,3\n-2,3,4\n"), std::size_t{0});
  EXPECT_EQ(by_index.feature_names, (std::vector<std::string>{"x2", "y"}));
  EXPECT_EQ(by_index.class_names, (std::vector<std::string>{"0.5", "-2"}));
}

TEST_F(Csv, HeaderlessFiles) {
  const auto p = write("n.csv", "1,2,a\n3,4,b\n");
  const Dataset ds = load_csv(p, std::size_t{2}, false);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"x0", "x1"}));
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_THROW(load_csv(p, std::string("y"), false), SchemaError);
}

TEST_F(Csv, ParseErrorNamesRowAndColumn) {
  const auto p = write("bad.csv", "x1,x2,y\nabc,1,a\n");
  try {
    load_csv(p, std::string("y"));
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("x1"), std::string::npos) << msg;
  }
}

TEST_F(Csv, MissingLabelFileAndQuotes) {
  EXPECT_THROW(load_csv(write("m.csv", "a,b\n1,2\n"), std::string("y")), SchemaError);
  EXPECT_THROW(load_csv(write("i.csv", "a,b\n1,2\n"), std::size_t{5}), SchemaError);
  EXPECT_THROW(load_csv(dir_ / "absent.csv", std::string("y")), IoError);
  EXPECT_THROW(load_csv(write("q.csv", "a,y\n\"1,5\",x\n"), std::string("y")), ParseError);
  EXPECT_THROW(load_csv(write("r.csv", "a,y\n1,x,3\n"), std::string("y")), ParseError);
}

TEST_F(Csv, WriteThenLoadIsIdempotent) {
  Rng rng(1);
  Dataset ds = synth_interaction(50, 4, InteractionRule::ProductSign, 0.3, rng);
  const fs::path first = dir_ / "first.csv";
  write_csv(first, ds, "label");
  const Dataset once = load_csv(first, std::string("label"));
  EXPECT_EQ(once.features, ds.features);
  const fs::path second = dir_ / "second.csv";
  write_csv(second, once, "label");
  const Dataset twice = load_csv(second, std::string("label"));
  EXPECT_EQ(twice.features, once.features);
  EXPECT_EQ(twice.labels, once.labels);
  EXPECT_EQ(twice.class_names, once.class_names);
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_EQ(once.class_names[static_cast<std::size_t>(once.labels[i])],
              ds.class_names[static_cast<std::size_t>(ds.labels[i])]);
}

TEST(FormatDouble, RoundTrips) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(ZScore, Examples) {
  const NormStats s = zscore_fit(Matrix{{1.0, 5.0}, {3.0, 5.0}});
  EXPECT_EQ(s.mean, (std::vector<double>{2.0, 5.0}));
  EXPECT_EQ(s.stddev, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(zscore_apply(Matrix{{1.0, 5.0}, {3.0, 5.0}}, s), (Matrix{{-1.0, 0.0}, {1.0, 0.0}}));
}

TEST(ZScore, SelfApplicationStandardizes) {
  Rng rng(3);
  Matrix x(300, 4);
  for (std::size_t i = 0; i < 300; ++i) {
    x(i, 0) = 1e3 + 50.0 * rng.normal();
    x(i, 1) = rng.uniform() * 1e-3;
    x(i, 2) = 7.0;
    x(i, 3) = rng.normal();
  }
  const Matrix z = zscore_apply(x, zscore_fit(x));
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 300; ++i) mean += z(i, j);
    mean /= 300.0;
    for (std::size_t i = 0; i < 300; ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
    EXPECT_LT(std::abs(mean), 1e-12) << j;
    if (j != 2) EXPECT_LT(std::abs(std::sqrt(var / 300.0) - 1.0), 1e-9) << j;
  }
  const Dataset ds{x, std::vector<int>(300, 0), {"a"}, {"a", "b", "c", "d"}};
  const Dataset zd = zscore_apply(ds, zscore_fit(ds));
  ASSERT_TRUE(zd.norm_stats.has_value());
  EXPECT_EQ(zd.norm_stats->stddev[2], 1.0);
  EXPECT_EQ(zd.features, z);
}

std::vector<int> two_class_labels(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  return y;
}

TEST(Split, ExactProportions) {
  Rng rng(4);
  const auto y = two_class_labels(100);
  const auto idx = stratified_split_indices(y, 2, {0.8, 0.0, 0.2}, rng);
  EXPECT_EQ(idx.parts[0].size(), 80u);
  EXPECT_TRUE(idx.parts[1].empty());
  ASSERT_EQ(idx.parts[2].size(), 20u);
  int ones = 0;
  for (std::size_t i : idx.parts[2]) ones += y[i];
  EXPECT_EQ(ones, 10);
}

TEST(Split, DeterministicPerSeed) {
  const auto y = two_class_labels(57);
  Rng a(9), b(9), c(10);
  const auto pa = stratified_split_indices(y, 2, {0.6, 0.2, 0.2}, a);
  const auto pb = stratified_split_indices(y, 2, {0.6, 0.2, 0.2}, b);
  const auto pc = stratified_split_indices(y, 2, {0.6, 0.2, 0.2}, c);
  EXPECT_EQ(pa.parts, pb.parts);
  EXPECT_NE(pa.parts, pc.parts);
}

TEST(Split, DisjointCoverAndProportionsWithinOneSample) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng.below(300);
    const std::size_t classes = 2 + rng.below(4);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i)
      y[i] = static_cast<int>(i < classes * 3 ? i % classes : rng.below(classes));
    const double train = 0.5 + 0.3 * rng.uniform();
    const double val = (1.0 - train) * rng.uniform();
    const SplitFractions f{train, val, 1.0 - train - val};
    const auto idx = stratified_split_indices(y, classes, f, rng);

    std::vector<std::size_t> all;
    for (const auto& part : idx.parts) all.insert(all.end(), part.begin(), part.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(n);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    EXPECT_EQ(all, expected);

    const std::array<double, 3> frac{f.train, f.val, f.test};
    for (std::size_t c = 0; c < classes; ++c) {
      const auto class_total = static_cast<double>(std::count(y.begin(), y.end(), static_cast<int>(c)));
      // Quotas below one sample are overridden by the one-member minimum.
      bool quotas_reach_one = true;
      for (double fr : frac) quotas_reach_one = quotas_reach_one && (fr == 0.0 || class_total * fr >= 1.0);
      for (std::size_t s = 0; s < 3; ++s) {
        std::size_t got = 0;
        for (std::size_t i : idx.parts[s]) got += y[i] == static_cast<int>(c) ? 1 : 0;
        if (frac[s] > 0.0) EXPECT_GE(got, 1u);
        if (quotas_reach_one)
          EXPECT_LE(std::abs(static_cast<double>(got) - class_total * frac[s]), 1.0 + 1e-9);
      }
    }
  }
}

TEST(Split, ErrorsAndDatasetSplit) {
  Rng rng(6);
  const std::vector<int> y{0, 0, 0, 0, 1};
  EXPECT_THROW(stratified_split_indices(y, 2, {0.5, 0.25, 0.25}, rng), ArgumentError);
  EXPECT_THROW(stratified_split_indices(y, 2, {0.5, 0.1, 0.1}, rng), ArgumentError);

  const Dataset ds = synth_interaction(40, 3, InteractionRule::ProductSign, 0.0, rng);
  const DatasetSplit split = stratified_split(ds, {0.75, 0.0, 0.25}, rng);
  EXPECT_EQ(split.train.size() + split.test.size(), 40u);
  EXPECT_EQ(split.test.feature_names, ds.feature_names);
  EXPECT_EQ(split.test.class_names, ds.class_names);
}

TEST(Synth, LabelRule) {
  const std::vector<double> x{1.2, -0.4};
  EXPECT_EQ(interaction_label(x, InteractionRule::ProductSign), 0);
  const std::vector<double> y{-1.0, -2.0, 0.5};
  EXPECT_EQ(interaction_label(y, InteractionRule::ProductSign), 1);
  EXPECT_EQ(interaction_label(y, InteractionRule::ThreeWayProductSign), 1);
  EXPECT_THROW(interaction_label(x, InteractionRule::ThreeWayProductSign), ArgumentError);
  Rng rng(7);
  EXPECT_THROW(synth_interaction(10, 2, InteractionRule::ThreeWayProductSign, 0.1, rng),
               ArgumentError);
}

TEST(Synth, NoiselessLabelsFollowRule) {
  Rng rng(8);
  const Dataset ds = synth_interaction(500, 4, InteractionRule::ThreeWayProductSign, 0.0, rng);
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_EQ(ds.labels[i], interaction_label(ds.features.row(i), InteractionRule::ThreeWayProductSign));
}

TEST(Synth, BalanceAndNoMarginalCorrelation) {
  for (InteractionRule rule : {InteractionRule::ProductSign, InteractionRule::ThreeWayProductSign}) {
    Rng rng(9);
    const Dataset ds = synth_interaction(10000, 6, rule, 0.1, rng);
    const double n = 10000.0;
    const double pos = std::accumulate(ds.labels.begin(), ds.labels.end(), 0.0) / n;
    EXPECT_NEAR(pos, 0.5, 0.03);
    for (std::size_t j = 0; j < 6; ++j) {
      double mx = 0, sx = 0, sxy = 0, sy = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) mx += ds.features(i, j) / n;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const double dx = ds.features(i, j) - mx;
        const double dy = ds.labels[i] - pos;
        sx += dx * dx;
        sy += dy * dy;
        sxy += dx * dy;
      }
      EXPECT_LT(std::abs(sxy / std::sqrt(sx * sy)), 0.05) << j;
    }
  }
}

}  // namespace
}  // namespace tcn
