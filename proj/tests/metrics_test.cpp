#include "bandit_clusters/metrics.hpp"

#include <gtest/gtest.h>

#include <vector>

namespace bandits {
namespace {

TEST(RandIndexTest, HandComputedFourElementCase) {
  // Of the 6 pairs only (0,1) and (2,3) are grouped the same way in both.
  const std::vector<int> a{0, 0, 1, 1};
  const std::vector<int> b{0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(rand_index(a, b), 2.0 / 6.0);
}

TEST(RandIndexTest, IdenticalPartitionsScoreOne) {
  const std::vector<int> a{3, 1, 4, 1, 5};
  EXPECT_DOUBLE_EQ(rand_index(a, a), 1.0);
}

TEST(RandIndexTest, LabelsAreCategorical) {
  // Same grouping under renamed labels must score 1.
  const std::vector<int> a{0, 0, 1, 2, 2};
  const std::vector<int> b{7, 7, 42, 9, 9};
  EXPECT_DOUBLE_EQ(rand_index(a, b), 1.0);
}

TEST(RandIndexTest, AllSingletonsVersusOneBlock) {
  const std::vector<int> a{0, 1, 2, 3};
  const std::vector<int> b{5, 5, 5, 5};
  EXPECT_DOUBLE_EQ(rand_index(a, b), 0.0);
}

TEST(RandIndexTest, TinyPartitionsScoreOne) {
  EXPECT_DOUBLE_EQ(rand_index({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(rand_index({4}, {9}), 1.0);
}

TEST(RandIndexTest, SizeMismatchThrows) {
  EXPECT_THROW(rand_index({0, 1}, {0}), std::invalid_argument);
}

}  // namespace
}  // namespace bandits
