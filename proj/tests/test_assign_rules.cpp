#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <tuple>

#include "e2edet/assign_rules.hpp"
#include "e2edet/error.hpp"
#include "support/oracles.hpp"

namespace e2edet {
namespace {

const PyramidLayout kLayout = PyramidLayout::fcos_default(256, 256);

Prediction at(int level, Cell cell, std::vector<double> scores, Box box) {
  Prediction p;
  p.level = level;
  p.cell = cell;
  p.scores = std::move(scores);
  p.box = box;
  return p;
}

// Every cell of every level, scored `score`, predicting `box`.
std::vector<Prediction> dense(const PyramidLayout& layout, double score, Box box) {
  std::vector<Prediction> preds;
  for (int l = 0; l < layout.num_levels(); ++l) {
    for (int r = 0; r < layout.level_height(l); ++r) {
      for (int c = 0; c < layout.level_width(l); ++c) preds.push_back(at(l, {r, c}, {score}, box));
    }
  }
  return preds;
}

QualityParams global_alpha(double alpha) {
  QualityParams q;
  q.alpha = alpha;
  q.prior = SpatialPrior::kGlobal;
  return q;
}

TEST(Rules, NamesRoundTrip) {
  for (AssignRule r : all_rules()) EXPECT_EQ(parse_rule(to_string(r)), r);
  EXPECT_THROW(parse_rule("hungarian"), ValidationError);
  EXPECT_EQ(all_rules().size(), 9u);
}

TEST(Rules, NoGroundTruthsMeansAllBackground) {
  const auto preds = dense(kLayout, 0.5, {0, 0, 10, 10});
  for (AssignRule r : all_rules()) {
    const TargetSet t = assign(r, {}, preds, kLayout, {});
    EXPECT_EQ(t.foreground_count(), 0u) << to_string(r);
  }
}

TEST(StatisticalThreshold, PopulationStd) {
  const std::vector<double> v = {0.2, 0.4, 0.9};
  const double mean = 0.5;
  const double sd = std::sqrt((0.09 + 0.01 + 0.16) / 3.0);
  EXPECT_NEAR(statistical_threshold(v), mean + sd, 1e-15);
  EXPECT_NEAR(statistical_threshold(v), 0.794, 5e-4);
  EXPECT_EQ(statistical_threshold(std::vector<double>{0.3, 0.3, 0.3}), 0.3);
}

// ---- poto -------------------------------------------------------------------

TEST(Poto, UniqueBestPrediction) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 40, 40}, 1}};
  std::vector<Prediction> preds = {at(0, {2, 2}, {0.4}, {0, 0, 30, 30}),
                                   at(0, {2, 3}, {0.9}, {0, 0, 40, 40}),
                                   at(0, {3, 2}, {0.5}, {5, 5, 40, 40})};
  const TargetSet t = poto_assign(gts, preds, {}, kLayout);
  EXPECT_EQ(t.foreground(), std::vector<int>({1}));
  EXPECT_EQ(t.gt_of_pred[1], 0);
}

TEST(Poto, CrowdedPairMatchesEnumeration) {
  const std::vector<GroundTruth> gts = {{0, {10, 10, 50, 50}, 1}, {0, {18, 10, 58, 50}, 2}};
  std::vector<Prediction> preds = {at(0, {3, 3}, {0.9}, {14, 10, 54, 50}),
                                   at(0, {3, 4}, {0.6}, {10, 10, 50, 50}),
                                   at(0, {4, 3}, {0.7}, {18, 11, 58, 50}),
                                   at(0, {4, 4}, {0.2}, {0, 0, 20, 20})};
  const QualityParams qp;
  const TargetSet t = poto_assign(gts, preds, qp, kLayout);
  const Assignment oracle = brute_force_match(quality_matrix(gts, preds, qp, kLayout));
  ASSERT_TRUE(t.assignment.has_value());
  EXPECT_EQ(t.assignment->pairs, oracle.pairs);
  EXPECT_EQ(t.foreground_count(), 2u);
}

TEST(Poto, MoreGtsThanPredictions) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 40, 40}, 1}, {0, {100, 100, 140, 140}, 2}};
  const std::vector<Prediction> preds = {at(0, {2, 2}, {0.9}, {0, 0, 40, 40})};
  const TargetSet t = poto_assign(gts, preds, {}, kLayout);
  EXPECT_EQ(t.foreground(), std::vector<int>({0}));
  EXPECT_EQ(t.unmatched_gts, std::vector<int>({1}));
}

// ---- anchor -----------------------------------------------------------------

TEST(AnchorRule, ExactAnchorWins) {
  const std::vector<GroundTruth> gts = {{0, {10, 10, 50, 50}, 1}};
  std::vector<Prediction> preds = dense(kLayout, 0.5, {0, 0, 1, 1});
  preds[7].anchor = Box{10, 10, 50, 50};
  const TargetSet t = anchor_rule(gts, preds, kLayout);
  EXPECT_EQ(t.foreground(), std::vector<int>({7}));
}

TEST(AnchorRule, DisjointBestAnchors) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 20, 20}, 1}, {0, {100, 100, 120, 120}, 2}};
  std::vector<Prediction> preds = {at(0, {0, 0}, {0.5}, {}), at(0, {1, 1}, {0.5}, {})};
  preds[0].anchor = Box{0, 0, 20, 20};
  preds[1].anchor = Box{100, 100, 121, 121};
  const TargetSet t = anchor_rule(gts, preds, kLayout);
  EXPECT_EQ(t.gt_of_pred, std::vector<int>({0, 1}));
}

TEST(AnchorRule, SharedBestAnchorLoserTakesRunnerUp) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 20, 20}, 1}, {0, {0, 0, 22, 22}, 2}};
  std::vector<Prediction> preds = {at(0, {0, 0}, {0.5}, {}), at(0, {1, 1}, {0.5}, {})};
  preds[0].anchor = Box{0, 0, 20, 20};  // IoU 1 with gt 0, 0.826 with gt 1
  preds[1].anchor = Box{0, 0, 25, 25};  // IoU 0.64 with gt 0, 0.7744 with gt 1
  const TargetSet t = anchor_rule(gts, preds, kLayout);
  EXPECT_EQ(t.gt_of_pred, std::vector<int>({0, 1}));
}

// Global greedy: repeatedly bind the highest-IoU free (gt, anchor) pair.
std::vector<int> greedy_anchor_oracle(const std::vector<GroundTruth>& gts,
                                      const std::vector<Prediction>& preds) {
  std::vector<std::tuple<double, int, int>> pairs;
  for (int i = 0; i < static_cast<int>(gts.size()); ++i) {
    for (int j = 0; j < static_cast<int>(preds.size()); ++j) {
      const double v = iou(*preds[static_cast<std::size_t>(j)].anchor, gts[static_cast<std::size_t>(i)].box);
      if (v > 0.0) pairs.emplace_back(-v, i, j);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<int> owner(preds.size(), -1);
  std::vector<char> done(gts.size(), 0);
  for (const auto& [nv, i, j] : pairs) {
    if (done[static_cast<std::size_t>(i)] || owner[static_cast<std::size_t>(j)] >= 0) continue;
    owner[static_cast<std::size_t>(j)] = i;
    done[static_cast<std::size_t>(i)] = 1;
  }
  return owner;
}

TEST(AnchorRuleProperty, EqualsGlobalGreedy) {
  Rng rng(41);
  for (int t = 0; t < 300; ++t) {
    const int g = static_cast<int>(rng.uniform_int(1, 5));
    const int n = static_cast<int>(rng.uniform_int(1, 8));
    std::vector<GroundTruth> gts;
    for (int i = 0; i < g; ++i) gts.push_back({0, testing::random_box(rng, 60, 5, 40), i});
    std::vector<Prediction> preds;
    for (int j = 0; j < n; ++j) {
      Prediction p = at(0, {0, j}, {0.5}, {});
      p.anchor = testing::random_box(rng, 60, 5, 40);
      preds.push_back(p);
    }
    EXPECT_EQ(anchor_rule(gts, preds, kLayout).gt_of_pred, greedy_anchor_oracle(gts, preds))
        << "instance " << t;
  }
}

// ---- center -----------------------------------------------------------------

TEST(CenterRule, GtCentredOnCell) {
  // 40 px box -> level 0; centre (36, 20) is the centre of cell (2, 4)
  const std::vector<GroundTruth> gts = {{0, {16, 0, 56, 40}, 1}};
  const auto preds = dense(kLayout, 0.5, {0, 0, 1, 1});
  const TargetSet t = center_rule(gts, preds, kLayout);
  ASSERT_EQ(t.foreground_count(), 1u);
  const Prediction& p = preds[static_cast<std::size_t>(t.foreground()[0])];
  EXPECT_EQ(p.level, 0);
  EXPECT_EQ(p.cell, (Cell{2, 4}));
}

TEST(CenterRule, HundredPixelBoxUsesSecondLevel) {
  const std::vector<GroundTruth> gts = {{0, {50, 50, 150, 150}, 1}};
  const auto preds = dense(kLayout, 0.5, {0, 0, 1, 1});
  const TargetSet t = center_rule(gts, preds, kLayout);
  ASSERT_EQ(t.foreground_count(), 1u);
  EXPECT_EQ(preds[static_cast<std::size_t>(t.foreground()[0])].level, 1);
}

TEST(CenterRule, IdenticalGtsCollide) {
  const std::vector<GroundTruth> gts = {{0, {16, 0, 56, 40}, 1}, {0, {16, 0, 56, 40}, 2}};
  const auto preds = dense(kLayout, 0.5, {0, 0, 1, 1});
  const TargetSet t = center_rule(gts, preds, kLayout);
  EXPECT_EQ(t.foreground_count(), 1u);
  EXPECT_EQ(t.unmatched_gts, std::vector<int>({1}));
}

// ---- fcos -------------------------------------------------------------------

TEST(FcosRule, SmallCentredGtGetsCellsWithinRadius) {
  const std::vector<GroundTruth> gts = {{0, {100, 100, 140, 140}, 1}};
  const auto preds = dense(kLayout, 0.5, {0, 0, 1, 1});
  const TargetSet t = fcos_o2m(gts, preds, kLayout, 1.5);
  std::vector<int> expected;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const Prediction& p = preds[j];
    const Point c = kLayout.cell_center(p.level, p.cell);
    const double s = kLayout.stride(p.level);
    const bool inside = c.x > 100 && c.x < 140 && c.y > 100 && c.y < 140;
    const bool near = std::abs(c.x - 120) <= 1.5 * s && std::abs(c.y - 120) <= 1.5 * s;
    const double m = std::max({c.x - 100, c.y - 100, 140 - c.x, 140 - c.y});
    const LevelRange& r = kLayout.ranges()[static_cast<std::size_t>(p.level)];
    if (inside && near && m >= r.lo && m < r.hi) expected.push_back(static_cast<int>(j));
  }
  EXPECT_FALSE(expected.empty());
  EXPECT_EQ(t.foreground(), expected);
}

TEST(FcosRule, NestedGtsGiveOverlapToInner) {
  const std::vector<GroundTruth> gts = {{0, {60, 60, 180, 180}, 1}, {0, {100, 100, 140, 140}, 2}};
  const auto preds = dense(kLayout, 0.5, {0, 0, 1, 1});
  const TargetSet alone = fcos_o2m(std::span(gts).subspan(1), preds, kLayout, 100.0);
  const TargetSet both = fcos_o2m(gts, preds, kLayout, 100.0);
  for (int j : alone.foreground()) EXPECT_EQ(both.gt_of_pred[static_cast<std::size_t>(j)], 1);
}

// ---- atss -------------------------------------------------------------------

TEST(AtssRule, ThresholdKeepsOnlyBestAnchor) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 100, 100}, 1}};
  std::vector<Prediction> preds = {at(0, {5, 5}, {0.5}, {}), at(0, {5, 6}, {0.5}, {}),
                                   at(0, {6, 5}, {0.5}, {})};
  preds[0].anchor = Box{0, 0, 100, 20};  // IoU 0.2
  preds[1].anchor = Box{0, 0, 100, 40};  // IoU 0.4
  preds[2].anchor = Box{0, 0, 100, 90};  // IoU 0.9
  const TargetSet t = atss_o2m(gts, preds, kLayout, 9);
  EXPECT_EQ(t.foreground(), std::vector<int>({2}));
}

TEST(AtssRule, KLargerThanCellsUsesAll) {
  // all anchors equal -> threshold equals the common IoU -> every inside cell kept
  const std::vector<GroundTruth> gts = {{0, {0, 0, 100, 100}, 1}};
  std::vector<Prediction> preds;
  for (int c = 0; c < 4; ++c) {
    Prediction p = at(0, {1, c}, {0.5}, {});
    p.anchor = Box{0, 0, 50, 50};
    preds.push_back(p);
  }
  EXPECT_EQ(atss_o2m(gts, preds, kLayout, 100).foreground_count(), 4u);
}

TEST(AtssRule, GtAwayFromAllCentresIsEmpty) {
  // thin box between the cell-centre rows 4 and 12
  const std::vector<GroundTruth> gts = {{0, {0, 5, 100, 11}, 1}};
  const auto preds = dense(kLayout, 0.5, {0, 0, 1, 1});
  const TargetSet t = atss_o2m(gts, preds, kLayout, 9);
  EXPECT_EQ(t.foreground_count(), 0u);
  EXPECT_EQ(t.unmatched_gts, std::vector<int>({0}));
}

// ---- quality_atss -----------------------------------------------------------

TEST(QualityAtss, PooledThreshold) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 100, 100}, 1}};
  const std::vector<Prediction> preds = {at(0, {1, 1}, {0.2}, {0, 0, 100, 100}),
                                         at(1, {1, 1}, {0.4}, {0, 0, 100, 100}),
                                         at(2, {0, 0}, {0.9}, {0, 0, 100, 100})};
  const TargetSet t = quality_atss(gts, preds, global_alpha(0.0), kLayout, 9);
  EXPECT_EQ(t.foreground(), std::vector<int>({2}));
}

TEST(QualityAtss, EqualQualitiesAllKept) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 100, 100}, 1}};
  const std::vector<Prediction> preds = {at(0, {1, 1}, {0.6}, {0, 0, 100, 100}),
                                         at(0, {1, 2}, {0.6}, {0, 0, 100, 100}),
                                         at(1, {0, 0}, {0.6}, {0, 0, 100, 100})};
  EXPECT_EQ(quality_atss(gts, preds, global_alpha(0.5), kLayout, 9).foreground_count(), 3u);
}

TEST(QualityAtss, TopKIsPerLevel) {
  // five level-0 candidates with k = 2: only the two best enter the pool
  const std::vector<GroundTruth> gts = {{0, {0, 0, 100, 100}, 1}};
  std::vector<Prediction> preds;
  for (int c = 0; c < 5; ++c) preds.push_back(at(0, {0, c}, {0.1 * (c + 1)}, {0, 0, 100, 100}));
  // pool {0.5, 0.4}: threshold 0.45 + 0.05 = 0.5
  EXPECT_EQ(quality_atss(gts, preds, global_alpha(0.0), kLayout, 2).foreground(),
            std::vector<int>({4}));
}

// ---- quality_fcos -----------------------------------------------------------

TEST(QualityFcos, PerfectPredictionPicksLevel) {
  const Box gt{96, 96, 160, 160};
  const std::vector<GroundTruth> gts = {{0, gt, 1}};
  std::vector<Prediction> preds = dense(kLayout, 0.3, {100, 100, 150, 150});
  std::size_t perfect = 0;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    if (preds[j].level == 2 && preds[j].cell == Cell{3, 3}) perfect = j;
  }
  preds[perfect].scores = {1.0};
  preds[perfect].box = gt;
  const TargetSet t = quality_fcos(gts, preds, {}, kLayout, 1.5);
  ASSERT_GT(t.foreground_count(), 0u);
  for (int j : t.foreground()) EXPECT_EQ(preds[static_cast<std::size_t>(j)].level, 2);
}

TEST(QualityFcos, TieAcrossLevelsGoesLow) {
  const Box gt{64, 64, 192, 192};
  const std::vector<GroundTruth> gts = {{0, gt, 1}};
  std::vector<Prediction> preds = dense(kLayout, 0.8, gt);  // identical quality everywhere
  const TargetSet t = quality_fcos(gts, preds, global_alpha(0.5), kLayout, 1.5);
  ASSERT_GT(t.foreground_count(), 0u);
  for (int j : t.foreground()) EXPECT_EQ(preds[static_cast<std::size_t>(j)].level, 0);
}

TEST(QualityFcosProperty, LevelIsArgmaxOfPerLevelBest) {
  Rng rng(42);
  for (int t = 0; t < 50; ++t) {
    const std::vector<GroundTruth> gts = {{0, testing::random_box(rng, 256, 30, 200), 1}};
    std::vector<Prediction> preds = dense(kLayout, 0.0, {});
    for (auto& p : preds) {
      p.scores = {rng.uniform()};
      p.box = testing::random_box(rng, 256, 30, 200);
    }
    const QualityParams qp = global_alpha(0.8);
    const QualityMatrix q = quality_matrix(gts, preds, qp, kLayout);
    std::vector<double> level_best(static_cast<std::size_t>(kLayout.num_levels()), 0.0);
    for (std::size_t j = 0; j < preds.size(); ++j) {
      double& b = level_best[static_cast<std::size_t>(preds[j].level)];
      b = std::max(b, q(0, static_cast<int>(j)));
    }
    const int want = static_cast<int>(std::max_element(level_best.begin(), level_best.end()) -
                                      level_best.begin());
    const TargetSet got = quality_fcos(gts, preds, qp, kLayout, 1.5);
    for (int j : got.foreground()) EXPECT_EQ(preds[static_cast<std::size_t>(j)].level, want);
  }
}

// ---- quality_topk -----------------------------------------------------------

TEST(QualityTopk, LargeKTakesAllAdmissible) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 40, 40}, 1}};
  const std::vector<Prediction> preds = {at(0, {1, 1}, {0.5}, {0, 0, 40, 40}),
                                         at(0, {1, 2}, {0.5}, {0, 0, 30, 30}),
                                         at(0, {9, 9}, {0.5}, {0, 0, 40, 40})};  // outside prior
  const TargetSet t = quality_topk(gts, preds, {}, kLayout, 50);
  EXPECT_EQ(t.foreground(), std::vector<int>({0, 1}));
}

TEST(QualityTopkProperty, MatchesFullSort) {
  Rng rng(43);
  for (int t = 0; t < 200; ++t) {
    const std::vector<GroundTruth> gts = {{0, testing::random_box(rng, 256, 20, 200), 1}};
    std::vector<Prediction> preds;
    for (int j = 0; j < 20; ++j) {
      preds.push_back(at(static_cast<int>(rng.uniform_int(0, 2)),
                         {static_cast<int>(rng.uniform_int(0, 7)), static_cast<int>(rng.uniform_int(0, 7))},
                         {rng.uniform()}, testing::random_box(rng, 256, 20, 200)));
    }
    const QualityParams qp = global_alpha(0.8);
    const QualityMatrix q = quality_matrix(gts, preds, qp, kLayout);
    for (int k : {1, 3}) {
      std::vector<int> order(preds.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return q(0, a) > q(0, b); });
      std::vector<int> want(order.begin(), order.begin() + k);
      std::erase_if(want, [&](int j) { return q(0, j) <= 0.0; });
      std::sort(want.begin(), want.end());
      EXPECT_EQ(quality_topk(gts, preds, qp, kLayout, k).foreground(), want);
    }
  }
}

// ---- shared properties ------------------------------------------------------

TEST(RulesProperty, OneToOneRulesGiveAtMostOnePerGt) {
  Rng rng(44);
  const RuleParams params;
  for (int t = 0; t < 40; ++t) {
    std::vector<GroundTruth> gts;
    const int g = static_cast<int>(rng.uniform_int(1, 4));
    for (int i = 0; i < g; ++i) gts.push_back({0, testing::random_box(rng, 256, 16, 200), i});
    std::vector<Prediction> preds;
    for (int j = 0; j < 30; ++j) {
      const int l = static_cast<int>(rng.uniform_int(0, 2));
      preds.push_back(at(l,
                         {static_cast<int>(rng.uniform_int(0, kLayout.level_height(l) - 1)),
                          static_cast<int>(rng.uniform_int(0, kLayout.level_width(l) - 1))},
                         {rng.uniform()}, testing::random_box(rng, 256, 16, 200)));
    }
    for (AssignRule r : all_rules()) {
      const TargetSet ts = assign(r, gts, preds, kLayout, params);
      if (is_one_to_one(r)) {
        EXPECT_LE(ts.foreground_count(), gts.size());
        for (int i = 0; i < g; ++i) EXPECT_LE(ts.foreground_of(i).size(), 1u);
      }
      // determinism
      EXPECT_EQ(ts.gt_of_pred, assign(r, gts, preds, kLayout, params).gt_of_pred);
    }
  }
}

}  // namespace
}  // namespace e2edet
