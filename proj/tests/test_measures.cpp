#include <gtest/gtest.h>

#include <algorithm>

#include "subsetvis/error.hpp"
#include "subsetvis/measures.hpp"
#include "subsetvis/rng.hpp"

using namespace subsetvis;
using namespace subsetvis::analysis;

TEST(Consistency, IdenticalIsZero) {
  const std::vector<std::vector<double>> v{{0.2, 0.8}, {0.2, 0.8}, {0.2, 0.8}};
  EXPECT_EQ(consistency(v), 0.0);
  const std::vector<std::vector<double>> one{{0.1, 0.9}};
  EXPECT_EQ(consistency(one), 0.0);
}

TEST(Consistency, HandValue) {
  // Population sd of {0, 2} is 1 at both positions.
  const std::vector<std::vector<double>> v{{0.0, 2.0}, {2.0, 0.0}};
  EXPECT_DOUBLE_EQ(consistency(v), 1.0);
  const std::vector<std::vector<double>> w{{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  EXPECT_DOUBLE_EQ(consistency(w), std::sqrt(2.0 / 3.0) / 2.0);
}

TEST(Consistency, PermutationInvariant) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const auto n = 2 + rng.below(6);
    const auto d = 1 + rng.below(8);
    std::vector<std::vector<double>> v(n, std::vector<double>(d));
    for (auto& row : v) {
      for (auto& x : row) x = rng.uniform();
    }
    const double base = consistency(v);
    auto shuffled = v;
    rng.shuffle(shuffled.begin(), shuffled.end());
    EXPECT_NEAR(consistency(shuffled), base, 1e-15);
    std::vector<std::size_t> perm(d);
    for (std::size_t i = 0; i < d; ++i) perm[i] = i;
    rng.shuffle(perm.begin(), perm.end());
    auto cols = v;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) cols[r][c] = v[r][perm[c]];
    }
    EXPECT_NEAR(consistency(cols), base, 1e-15);
    EXPECT_GE(base, 0.0);
  }
}

TEST(Consistency, Errors) {
  EXPECT_THROW(consistency({}), Error);
  const std::vector<std::vector<double>> mixed{{1.0}, {1.0, 2.0}};
  EXPECT_THROW(consistency(mixed), Error);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(x, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(x, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile(x, 0.5), 2.5);
}

TEST(Marginal, UniformityBounds) {
  const std::vector<std::uint64_t> even{5, 5, 5, 5};
  EXPECT_DOUBLE_EQ(marginal_measures(even).uniformity, 1.0);
  const std::vector<std::uint64_t> spike{0, 9, 0, 0};
  EXPECT_DOUBLE_EQ(marginal_measures(spike).uniformity, 0.0);
  const std::vector<std::uint64_t> half{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(marginal_measures(half).uniformity, 0.5);
  const std::vector<std::uint64_t> empty{0, 0, 0};
  EXPECT_EQ(marginal_measures(empty).uniformity, 0.0);
}

TEST(Marginal, TukeyFences) {
  const std::vector<std::uint64_t> c{10, 11, 12, 10, 11, 90};
  // Q1 = 10.25, Q3 = 11.75, fences [8, 14].
  EXPECT_EQ(marginal_measures(c).outlier_count, 1u);
  const std::vector<std::uint64_t> flat{3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 0, 3, 3, 3, 3, 3, 3, 3, 3};
  EXPECT_EQ(marginal_measures(flat).outlier_count, 1u);
  const std::vector<std::uint64_t> spread{1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(marginal_measures(spread).outlier_count, 0u);
  const auto j = measures_to_json(marginal_measures(c));
  EXPECT_EQ(j.at("outlier_count"), 1);
}
