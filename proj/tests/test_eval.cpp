#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "vstory/eval.hpp"

using namespace vstory;
using namespace vstory::testing;

namespace {

std::vector<LabeledScore> samples(std::vector<double> scores, std::vector<int> labels) {
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], labels[i] != 0});
  return out;
}

/// Probability that a random positive outscores a random negative, ties count half.
double mann_whitney(const std::vector<LabeledScore>& s) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& p : s)
    for (const auto& n : s)
      if (p.positive && !n.positive) {
        pairs += 1.0;
        wins += p.score > n.score ? 1.0 : (p.score == n.score ? 0.5 : 0.0);
      }
  return wins / pairs;
}

PairwisePreferences prefs(std::vector<std::vector<double>> wins) {
  PairwisePreferences p;
  for (std::size_t i = 0; i < wins.size(); ++i) p.items.push_back("m" + std::to_string(i));
  p.wins = std::move(wins);
  return p;
}

}  // namespace

TEST(Roc, Examples) {
  EXPECT_DOUBLE_EQ(roc_curve(samples({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})).auc, 1.0);
  EXPECT_DOUBLE_EQ(roc_curve(samples({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0})).auc, 0.0);
  EXPECT_DOUBLE_EQ(roc_curve(samples({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0})).auc, 0.5);
  EXPECT_DOUBLE_EQ(roc_curve(samples({0.9, 0.8, 0.4, 0.2}, {1, 0, 1, 0})).auc, 0.75);
}

TEST(Roc, CurveEndpointsAndTieGrouping) {
  const auto c = roc_curve(samples({0.5, 0.5, 0.3}, {1, 0, 0}));
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_EQ(c.points.front(), std::make_pair(0.0, 0.0));
  EXPECT_EQ(c.points[1], std::make_pair(0.5, 1.0));
  EXPECT_EQ(c.points.back(), std::make_pair(1.0, 1.0));
  EXPECT_DOUBLE_EQ(c.auc, 0.75);
}

TEST(Roc, SingleClassIsIllPosed) {
  EXPECT_THROW(roc_curve(samples({0.1, 0.2}, {1, 1})), IllPosed);
  EXPECT_THROW(roc_curve(samples({0.1, 0.2}, {0, 0})), IllPosed);
  EXPECT_THROW(roc_curve({}), IllPosed);
}

TEST(Roc, MatchesMannWhitneyAndIsMonotoneInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> coin(0, 1), level(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabeledScore> s;
    for (int i = 0; i < 20; ++i) s.push_back({level(rng) / 6.0, coin(rng) == 1});
    s[0].positive = true;
    s[1].positive = false;
    const double auc = roc_curve(s).auc;
    EXPECT_NEAR(auc, mann_whitney(s), 1e-12);
    auto t = s;
    for (auto& x : t) x.score = std::exp(3.0 * x.score) - 7.0;
    EXPECT_NEAR(roc_curve(t).auc, auc, 1e-12);
  }
}

TEST(Roc, PairwiseFromScoresAndLabels) {
  const PairScores scores{{{"a", "b"}, 0.9}, {{"b", "c"}, 0.7}, {{"a", "c"}, 0.1}};
  const AdjacencyLabels labels{{{"b", "a"}, true}, {{"c", "b"}, true}, {{"c", "a"}, false}};
  EXPECT_DOUBLE_EQ(pairwise_roc(scores, labels).auc, 1.0);
  const AdjacencyLabels uncovered{{{"a", "b"}, true}, {{"a", "z"}, false}};
  EXPECT_THROW(pairwise_roc(scores, uncovered), InvalidInput);
}

TEST(Roc, AdjacencyScoreTakesBothDirections) {
  CoherenceMatrix c{(Matrix(2, 2) << 0.0, 0.2, 0.6, 0.0).finished()};
  EXPECT_EQ(adjacency_score(c, 0, 1), 0.6);
  EXPECT_EQ(adjacency_score(c, 1, 0), 0.6);
}

TEST(Roc, AverageOfIdenticalCurvesIsThatCurve) {
  const auto c = roc_curve(samples({0.9, 0.8, 0.4, 0.2}, {1, 0, 1, 0}));
  const std::vector<RocCurve> curves{c, c, c};
  const auto avg = average_roc(curves);
  EXPECT_DOUBLE_EQ(avg.auc, c.auc);
  ASSERT_EQ(avg.points.size(), 101u);
  EXPECT_EQ(avg.points.front().first, 0.0);
  EXPECT_EQ(avg.points.back(), std::make_pair(1.0, 1.0));
  // c passes through (0,.5), (.5,.5), (.5,1)
  EXPECT_NEAR(avg.points[25].second, 0.5, 1e-12);
  EXPECT_NEAR(avg.points[75].second, 1.0, 1e-12);
}

TEST(Roc, AverageOfPerfectAndChance) {
  const auto perfect = roc_curve(samples({1.0, 0.0}, {1, 0}));
  const auto chance = roc_curve(samples({0.5, 0.5}, {1, 0}));
  const std::vector<RocCurve> curves{perfect, chance};
  const auto avg = average_roc(curves, 11);
  EXPECT_DOUBLE_EQ(avg.auc, 0.75);
  for (const auto& [x, y] : avg.points)
    if (x > 0.0) EXPECT_NEAR(y, (1.0 + x) / 2.0, 1e-12);
  EXPECT_THROW(average_roc(std::vector<RocCurve>{}), InvalidInput);
}

TEST(BradleyTerry, ThreeToOne) {
  const auto bt = bradley_terry(prefs({{0, 3}, {1, 0}}));
  EXPECT_TRUE(bt.converged);
  EXPECT_FALSE(bt.smoothed);
  EXPECT_NEAR(bt.scores[0], 0.75, 1e-6);
  EXPECT_NEAR(bt.scores[1], 0.25, 1e-6);
}

TEST(BradleyTerry, SymmetricGivesUniform) {
  for (double w : {1.0, 5.0, 0.5}) {
    const auto bt = bradley_terry(prefs({{0, w, w}, {w, 0, w}, {w, w, 0}}));
    for (double s : bt.scores) EXPECT_NEAR(s, 1.0 / 3.0, 1e-9);
  }
  const auto bt = bradley_terry(prefs({{0, 2, 1}, {1, 0, 2}, {2, 1, 0}}));
  for (double s : bt.scores) EXPECT_NEAR(s, 1.0 / 3.0, 1e-9);
}

TEST(BradleyTerry, SatisfiesStationarityAndScaleInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> count(1, 9);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<double>> w(4, std::vector<double>(4, 0.0));
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        if (a != b) w[a][b] = count(rng);
    const auto bt = bradley_terry(prefs(w));
    ASSERT_TRUE(bt.converged);
    EXPECT_NEAR(std::accumulate(bt.scores.begin(), bt.scores.end(), 0.0), 1.0, 1e-12);
    for (std::size_t a = 0; a < 4; ++a) {
      double won = 0.0, expected = 0.0;
      for (std::size_t b = 0; b < 4; ++b) {
        won += w[a][b];
        expected += (w[a][b] + w[b][a]) * bt.scores[a] / (bt.scores[a] + bt.scores[b]);
      }
      EXPECT_NEAR(won, expected, 1e-5);
    }
    auto scaled = w;
    for (auto& row : scaled)
      for (auto& x : row) x *= 7.0;
    const auto bt7 = bradley_terry(prefs(scaled));
    for (std::size_t a = 0; a < 4; ++a) EXPECT_NEAR(bt7.scores[a], bt.scores[a], 1e-6);
  }
}

TEST(BradleyTerry, DisconnectedIsIllPosed) {
  EXPECT_THROW(bradley_terry(prefs({{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 2}, {0, 0, 1, 0}})), IllPosed);
}

TEST(BradleyTerry, NeverWinningItemIsSmoothed) {
  const auto bt = bradley_terry(prefs({{0, 4}, {0, 0}}));
  EXPECT_TRUE(bt.smoothed);
  EXPECT_TRUE(bt.converged);
  EXPECT_GT(bt.scores[0], 0.99);
  EXPECT_GT(bt.scores[1], 0.0);
}

TEST(BradleyTerry, Validation) {
  EXPECT_THROW(bradley_terry(prefs({})), InvalidInput);
  EXPECT_THROW(bradley_terry(prefs({{0, 1}, {1}})), InvalidInput);
  EXPECT_THROW(bradley_terry(prefs({{0, -1}, {1, 0}})), InvalidInput);
  EXPECT_THROW(bradley_terry(prefs({{1, 1}, {1, 0}})), InvalidInput);
  const auto single = bradley_terry(prefs({{0}}));
  EXPECT_EQ(single.scores, std::vector<double>{1.0});
}

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {0.1, 0.5, 0.7, 3.0}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  EXPECT_EQ(spearman({1, 2, 3}, {5, 5, 5}), 0.0);
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {1, 1, 2, 2}), std::sqrt(0.8), 1e-12);
  EXPECT_THROW(spearman({1, 2}, {1}), InvalidInput);
}

TEST(DynamicsReport, FollowsOrdering) {
  const std::vector<double> phi{0.3, 0.1, 0.2};
  const auto r = dynamics_report({1, 2, 0}, phi);
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_EQ(r.points[0].position, 1u);
  EXPECT_EQ(r.points[0].clip, 1u);
  EXPECT_EQ(r.points[2].phi, 0.3);
  EXPECT_DOUBLE_EQ(r.spearman, 1.0);
  EXPECT_DOUBLE_EQ(dynamics_report({0, 2, 1}, phi).spearman, -1.0);
  EXPECT_THROW(dynamics_report({0, 0, 1}, phi), InvalidInput);
}
