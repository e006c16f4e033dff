#include "bandit_clusters/club.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <vector>

#include "bandit_clusters/policy.hpp"
#include "bandit_clusters/rng.hpp"

namespace bandits {
namespace {

PolicyParams manual_params(double alpha_theta, double alpha_p, double beta) {
  PolicyParams p;
  p.alpha_theta = alpha_theta;
  p.alpha_p = alpha_p;
  p.beta = beta;
  return p;
}

Eigen::MatrixXd single_item(const Eigen::VectorXd& x) {
  Eigen::MatrixXd items(x.size(), 1);
  items.col(0) = x;
  return items;
}

void serve(ClubPolicy& policy, int user, const Eigen::VectorXd& x, double y) {
  policy.choose(user, single_item(x));
  policy.learn(user, x, y);
}

TEST(UserGraphTest, CompleteGraphConnectsEveryPair) {
  const UserGraph g = UserGraph::complete(5);
  for (int i = 0; i < 5; ++i) {
    EXPECT_FALSE(g.has_edge(i, i));
    for (int j = 0; j < 5; ++j) {
      if (i != j) {
        EXPECT_TRUE(g.has_edge(i, j));
      }
    }
  }
  EXPECT_EQ(g.components(), std::vector<int>(5, 0));
}

TEST(UserGraphTest, ComponentLabelsFollowSmallestVertexOrder) {
  UserGraph g = UserGraph::complete(4);
  g.remove_edge(0, 1);
  g.remove_edge(0, 2);
  g.remove_edge(1, 3);
  g.remove_edge(2, 3);
  // Remaining edges: 0-3 and 1-2.
  EXPECT_EQ(g.components(), (std::vector<int>{0, 1, 1, 0}));
}

TEST(UserGraphTest, ErdosRenyiIsSeedDeterministic) {
  const UserGraph a = UserGraph::erdos_renyi(40, 7);
  const UserGraph b = UserGraph::erdos_renyi(40, 7);
  const UserGraph c = UserGraph::erdos_renyi(40, 8);
  int differences = 0;
  for (int i = 0; i < 40; ++i) {
    for (int j = i + 1; j < 40; ++j) {
      EXPECT_EQ(a.has_edge(i, j), b.has_edge(i, j));
      if (a.has_edge(i, j) != c.has_edge(i, j)) ++differences;
    }
  }
  EXPECT_GT(differences, 0);
}

TEST(UserGraphTest, VertexRangeIsChecked) {
  const UserGraph g = UserGraph::complete(3);
  EXPECT_THROW(g.has_edge(0, 3), std::invalid_argument);
  EXPECT_THROW(g.has_edge(-1, 0), std::invalid_argument);
}

TEST(ClubTest, StartsAsOneComponent) {
  ClubPolicy policy(5, 3, manual_params(1.0, 2.0, 0.5));
  EXPECT_EQ(policy.cluster_count(), 1);
  EXPECT_EQ(policy.partition(), std::vector<int>(5, 0));
}

TEST(ClubTest, NoDeletionsMatchesSharedModelBitwise) {
  const PolicyParams params = manual_params(1e6, 2.0, 0.8);
  ClubPolicy club(3, 4, params);
  LinUcbOnePolicy one(3, 4, params);
  RngStream rng(99);
  Eigen::MatrixXd items(4, 5);
  for (int t = 0; t < 300; ++t) {
    const int user = t % 3;
    for (int j = 0; j < 5; ++j) {
      Eigen::VectorXd x(4);
      for (int i = 0; i < 4; ++i) x(i) = rng.gaussian();
      items.col(j) = x / x.norm();
    }
    const int a = club.choose(user, items);
    const int b = one.choose(user, items);
    ASSERT_EQ(a, b) << "diverged at round " << t;
    const double y = rng.uniform01();
    club.learn(user, items.col(a), y);
    one.learn(user, items.col(b), y);
  }
  EXPECT_EQ(club.cluster_count(), 1);
}

TEST(ClubTest, SeparatingRewardsDeleteTheEdge) {
  ClubPolicy policy(2, 2, manual_params(0.5, 2.0, 0.2));
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  for (int t = 0; t < 60; ++t) {
    serve(policy, t % 2, x, t % 2 == 0 ? 0.9 : 0.1);
  }
  EXPECT_FALSE(policy.graph().has_edge(0, 1));
  EXPECT_EQ(policy.cluster_count(), 2);
  EXPECT_EQ(policy.partition(), (std::vector<int>{0, 1}));
}

TEST(ClubTest, ChainedSimilarityKeepsOneComponent) {
  // User 2 sits between users 0 and 1: the 0-1 edge separates but both
  // stay linked through 2, so the component count never grows.
  ClubPolicy policy(3, 2, manual_params(0.5, 2.0, 0.2));
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  const double rewards[3] = {0.9, 0.1, 0.5};
  for (int t = 0; t < 45; ++t) {
    serve(policy, t % 3, x, rewards[t % 3]);
  }
  EXPECT_FALSE(policy.graph().has_edge(0, 1));
  EXPECT_TRUE(policy.graph().has_edge(0, 2));
  EXPECT_TRUE(policy.graph().has_edge(1, 2));
  EXPECT_EQ(policy.cluster_count(), 1);
}

TEST(ClubTest, ComponentStateMatchesUserAggregate) {
  ClubPolicy policy(2, 2, manual_params(0.5, 2.0, 0.2));
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  for (int t = 0; t < 60; ++t) {
    serve(policy, t % 2, x, t % 2 == 0 ? 0.9 : 0.1);
  }
  ASSERT_EQ(policy.cluster_count(), 2);
  for (int u = 0; u < 2; ++u) {
    const int c = policy.partition()[u];
    EXPECT_LT((policy.component_state(c).gramian() -
               policy.user_state(u).gramian())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-9);
    EXPECT_EQ(policy.component_state(c).count(), policy.user_state(u).count());
  }
}

TEST(ClubTest, ErdosRenyiOptionSeedsTheStartingGraph) {
  ClubOptions er;
  er.graph = ClubOptions::Graph::kErdosRenyi;
  er.graph_seed = 12;
  const PolicyParams params = manual_params(1.0, 2.0, 0.5);
  ClubPolicy a(30, 2, params, er);
  ClubPolicy b(30, 2, params, er);
  er.graph_seed = 13;
  ClubPolicy c(30, 2, params, er);
  int differences = 0;
  for (int i = 0; i < 30; ++i) {
    for (int j = i + 1; j < 30; ++j) {
      EXPECT_EQ(a.graph().has_edge(i, j), b.graph().has_edge(i, j));
      if (a.graph().has_edge(i, j) != c.graph().has_edge(i, j)) ++differences;
    }
  }
  EXPECT_GT(differences, 0);
}

TEST(ClubTest, BadArgumentsThrow) {
  ClubPolicy policy(2, 3, manual_params(1.0, 2.0, 0.5));
  Eigen::MatrixXd wrong(2, 1);
  wrong.setZero();
  EXPECT_THROW(policy.choose(0, wrong), std::invalid_argument);
  EXPECT_THROW(policy.choose(2, Eigen::MatrixXd::Zero(3, 1)),
               std::invalid_argument);
  Eigen::VectorXd bad(2);
  bad.setZero();
  EXPECT_THROW(policy.learn(0, bad, 0.5), std::invalid_argument);
}

}  // namespace
}  // namespace bandits
