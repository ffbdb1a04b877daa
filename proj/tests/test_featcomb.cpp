#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tcn/errors.hpp"
#include "tcn/featcomb.hpp"
#include "test_support.hpp"

namespace tcn {
namespace {

using Approach = CombinationApproach;

// Pascal's triangle, independent of the multiplicative formula in binomial().
std::uint64_t pascal(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::uint64_t>> t(n + 1, std::vector<std::uint64_t>(n + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) {
    t[i][0] = 1;
    for (std::size_t j = 1; j <= i; ++j) t[i][j] = t[i - 1][j - 1] + t[i - 1][j];
  }
  return k <= n ? t[n][k] : 0;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  return rng_normal(rng, n, 0.0, 1.0);
}

TEST(EnumerateSubsets, Lexicographic) {
  const std::vector<Subset> expected = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(enumerate_subsets(4, 2), expected);
  EXPECT_EQ(enumerate_subsets(3, 3), (std::vector<Subset>{{0, 1, 2}}));
  EXPECT_EQ(enumerate_subsets(5, 2).size(), pascal(5, 2));
  EXPECT_EQ(enumerate_subsets(4, 1), (std::vector<Subset>{{0}, {1}, {2}, {3}}));
}

TEST(EnumerateSubsets, CountsMatchPascalAndAreStrictlyIncreasing) {
  for (std::size_t n = 1; n <= 9; ++n) {
    for (std::size_t m = 1; m <= n; ++m) {
      const auto subsets = enumerate_subsets(n, m);
      ASSERT_EQ(subsets.size(), pascal(n, m));
      EXPECT_TRUE(std::is_sorted(subsets.begin(), subsets.end()));
      for (const auto& s : subsets) {
        EXPECT_TRUE(std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) == s.end());
        EXPECT_LT(s.back(), n);
      }
    }
  }
}

TEST(EnumerateSubsets, Errors) {
  EXPECT_THROW(enumerate_subsets(3, 4), ArgumentError);
  EXPECT_THROW(enumerate_subsets(3, 0), ArgumentError);
  try {
    enumerate_subsets(40, 10, 1000);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.requested(), pascal(40, 10));
    EXPECT_NE(std::string(e.what()).find(std::to_string(pascal(40, 10))), std::string::npos);
  }
}

TEST(Binomial, MatchesPascalAndSaturates) {
  for (std::size_t n = 0; n <= 30; ++n)
    for (std::size_t k = 0; k <= n; ++k) EXPECT_EQ(binomial(n, k), pascal(n, k));
  EXPECT_EQ(binomial(3, 5), 0u);
  EXPECT_EQ(binomial(1000, 500), std::numeric_limits<std::uint64_t>::max());
}

TEST(CombineMultiplicative, Examples) {
  EXPECT_EQ(combine_multiplicative(std::vector<double>{2, 3, 4}, enumerate_subsets(3, 3)),
            (std::vector<double>{24}));
  EXPECT_EQ(combine_multiplicative(std::vector<double>{1, 2, 3, 4}, enumerate_subsets(4, 2)),
            (std::vector<double>{2, 3, 4, 6, 8, 12}));
  EXPECT_EQ(combine_multiplicative(std::vector<double>{0, 2, 3}, enumerate_subsets(3, 3)),
            (std::vector<double>{0}));
}

TEST(CombinePairwiseSum, Examples) {
  EXPECT_EQ(combine_pairwise_sum(std::vector<double>{1, 2, 3}, enumerate_subsets(3, 3)),
            (std::vector<double>{11}));
  EXPECT_EQ(combine_pairwise_sum(std::vector<double>{1, 2, 3, 4}, enumerate_subsets(4, 3)),
            (std::vector<double>{11, 14, 19, 26}));
  EXPECT_EQ(combine_pairwise_sum(std::vector<double>{1, 2, 3}, enumerate_subsets(3, 2)),
            (std::vector<double>{2, 3, 6}));
  EXPECT_THROW(combine_pairwise_sum(std::vector<double>{1, 2}, enumerate_subsets(2, 1)),
               ArgumentError);
}

TEST(CombineBackward, Examples) {
  const std::vector<double> up{1};
  EXPECT_EQ(combine_backward(std::vector<double>{2, 3, 4}, enumerate_subsets(3, 3),
                             Approach::Multiplicative, up),
            (std::vector<double>{12, 8, 6}));
  EXPECT_EQ(combine_backward(std::vector<double>{1, 2, 3}, enumerate_subsets(3, 3),
                             Approach::PairwiseSum, up),
            (std::vector<double>{5, 4, 3}));
}

TEST(CombineBackward, ExactAtZero) {
  // d(x0 x1 x2)/dx0 at x0 = 0 is x1 x2, which a divide-out scheme would lose.
  const auto g = combine_backward(std::vector<double>{0, 3, 4}, enumerate_subsets(3, 3),
                                  Approach::Multiplicative, std::vector<double>{1});
  EXPECT_EQ(g, (std::vector<double>{12, 0, 0}));
}

TEST(CombineBackward, MatchesFiniteDifferences) {
  Rng rng(2024);
  for (auto approach : {Approach::Multiplicative, Approach::PairwiseSum}) {
    for (std::size_t n = 3; n <= 8; ++n) {
      for (std::size_t m = 2; m <= std::min<std::size_t>(4, n); ++m) {
        const auto subsets = enumerate_subsets(n, m);
        Matrix x = Matrix::row_vector(random_vector(n, rng));
        const Matrix upstream = Matrix::row_vector(random_vector(subsets.size(), rng));
        const auto loss = [&] {
          return test::weighted_sum(Matrix::row_vector(combine(x.row(0), subsets, approach)),
                                    upstream);
        };
        const Matrix numeric = test::numeric_gradient(loss, x);
        const Matrix analytic =
            Matrix::row_vector(combine_backward(x.row(0), subsets, approach, upstream.row(0)));
        EXPECT_LT(test::max_relative_error(analytic, numeric), 1e-6)
            << "n=" << n << " m=" << m << " approach=" << to_string(approach);
      }
    }
  }
}

TEST(GlobalInteraction, Examples) {
  EXPECT_EQ(global_interaction(std::vector<double>{1, 2, 3}, Activation::ReLU), 11.0);
  EXPECT_EQ(global_interaction(std::vector<double>{1, -2, 0.5}, Activation::ReLU), 0.0);
  EXPECT_EQ(global_interaction(std::vector<double>{1, -2, 0.5}, Activation::Identity), -2.5);
  EXPECT_THROW(global_interaction(std::vector<double>{1}, Activation::ReLU), ArgumentError);
}

TEST(GlobalInteraction, SquareOfSumIdentity) {
  Rng rng(8);
  const auto x = random_vector(50, rng);
  const double sum = std::accumulate(x.begin(), x.end(), 0.0);
  const double sum_sq = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
  const double oracle = (sum * sum - sum_sq) / 2.0;
  const double value = global_interaction(x, Activation::Identity);
  EXPECT_LE(std::abs(value - oracle) / std::max(std::abs(oracle), 1e-300), 1e-9);
}

TEST(Properties, FullSetPairwiseIdentity) {
  Rng rng(100);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + trial % 8;
    const auto x = random_vector(n, rng);
    const double sum = std::accumulate(x.begin(), x.end(), 0.0);
    const double sum_sq = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
    const double oracle = (sum * sum - sum_sq) / 2.0;
    const double value = combine_pairwise_sum(x, enumerate_subsets(n, n))[0];
    EXPECT_LE(std::abs(value - oracle), 1e-9 * std::max(std::abs(oracle), 1e-3));
  }
}

TEST(Properties, ApproachesCoincideAtPairs) {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const auto x = random_vector(n, rng);
    const auto subsets = enumerate_subsets(n, 2);
    const auto a = combine_multiplicative(x, subsets);
    const auto b = combine_pairwise_sum(x, subsets);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(Properties, Scaling) {
  Rng rng(102);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + trial % 5;
    const std::size_t m = 2 + trial % 2;
    const double c = 0.5 + rng.uniform() * 2.0;
    const auto x = random_vector(n, rng);
    std::vector<double> cx(x);
    for (double& v : cx) v *= c;
    const auto subsets = enumerate_subsets(n, m);
    const auto mult = combine_multiplicative(x, subsets);
    const auto mult_c = combine_multiplicative(cx, subsets);
    const auto pair = combine_pairwise_sum(x, subsets);
    const auto pair_c = combine_pairwise_sum(cx, subsets);
    for (std::size_t k = 0; k < subsets.size(); ++k) {
      const double expect_mult = std::pow(c, static_cast<double>(m)) * mult[k];
      const double expect_pair = c * c * pair[k];
      EXPECT_LE(std::abs(mult_c[k] - expect_mult), 1e-9 * std::max(std::abs(expect_mult), 1e-6));
      EXPECT_LE(std::abs(pair_c[k] - expect_pair), 1e-9 * std::max(std::abs(expect_pair), 1e-6));
    }
  }
}

TEST(Properties, PermutationInvarianceAsMultiset) {
  Rng rng(103);
  for (auto approach : {Approach::Multiplicative, Approach::PairwiseSum}) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 4 + trial % 4;
      CombinationSpec spec;
      spec.m = 2 + trial % 2;
      spec.approach = approach;
      Matrix x = test::random_matrix(1, n, rng);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(perm));
      Matrix px(1, n);
      for (std::size_t j = 0; j < n; ++j) px(0, j) = x(0, perm[j]);
      auto a = transform_dataset(x, spec).values;
      auto b = transform_dataset(px, spec).values;
      std::sort(a.values().begin(), a.values().end());
      std::sort(b.values().begin(), b.values().end());
      EXPECT_LE(max_abs_difference(a, b), 1e-12);
    }
  }
}

TEST(TransformDataset, Shapes) {
  Rng rng(4);
  CombinationSpec spec;
  const Matrix x = test::random_matrix(2, 3, rng);
  const auto plain = transform_dataset(x, spec);
  EXPECT_EQ(plain.values.rows(), 2u);
  EXPECT_EQ(plain.values.cols(), 3u);
  spec.augment_original = true;
  const auto augmented = transform_dataset(x, spec);
  EXPECT_EQ(augmented.values.cols(), 6u);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(augmented.values(r, 3 + j), x(r, j));

  CombinationSpec triples;
  triples.m = 3;
  std::size_t brute = 0;
  for (int i = 0; i < 20; ++i)
    for (int j = i + 1; j < 20; ++j)
      for (int k = j + 1; k < 20; ++k) ++brute;
  EXPECT_EQ(transform_dataset(test::random_matrix(1, 20, rng), triples).values.cols(), brute);
}

TEST(TransformDataset, ColumnsFollowSubsetsAndGlobalTermIsLast) {
  CombinationSpec spec;
  spec.append_global_interaction = true;
  spec.augment_original = true;
  const Matrix x{{1, 2, 3}};
  const auto out = transform_dataset(x, spec);
  EXPECT_EQ(out.values, (Matrix{{2, 3, 6, 1, 2, 3, 11}}));
  EXPECT_EQ(out.spec.output_width(3), 7u);
  const std::vector<std::string> originals{"a", "b", "c"};
  EXPECT_EQ(combined_feature_names(out.subsets, spec, originals),
            (std::vector<std::string>{"comb_0_1", "comb_0_2", "comb_1_2", "a", "b", "c",
                                      "global_interaction"}));
}

TEST(TransformDataset, Errors) {
  CombinationSpec spec;
  spec.m = 3;
  spec.max_combined = 10;
  EXPECT_THROW(transform_dataset(Matrix(1, 6), spec), CapacityError);
  spec.m = 1;
  spec.approach = Approach::PairwiseSum;
  EXPECT_THROW(transform_dataset(Matrix(1, 6), spec), ArgumentError);
}

}  // namespace
}  // namespace tcn
