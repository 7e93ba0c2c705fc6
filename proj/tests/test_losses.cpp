#include <gtest/gtest.h>

#include <cmath>

#include "e2edet/error.hpp"
#include "e2edet/losses.hpp"
#include "e2edet/matching.hpp"

namespace e2edet {
namespace {

Prediction pred(std::vector<double> scores, Box box) {
  Prediction p;
  p.scores = std::move(scores);
  p.box = box;
  return p;
}

TEST(FocalLoss, ConfidentCorrectIsNearZero) {
  EXPECT_LT(focal_loss(1.0 - 1e-9, 1, {}), 1e-12);
  EXPECT_LT(focal_loss(1e-9, 0, {}), 1e-12);
}

TEST(FocalLoss, HalfProbabilityDefaults) {
  EXPECT_NEAR(focal_loss(0.5, 1, {}), 0.25 * 0.25 * std::log(2.0), 1e-15);
}

TEST(FocalLoss, ReducesToCrossEntropy) {
  const LossParams ce{0.0, 1.0, 2.0};
  EXPECT_NEAR(focal_loss(0.5, 1, ce), std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss(0.2, 1, ce), -std::log(0.2), 1e-15);
}

TEST(FocalLoss, NegativeTargetUsesOneMinusAlpha) {
  // p_t = 0.7, alpha_t = 0.75
  EXPECT_NEAR(focal_loss(0.3, 0, {}), 0.75 * 0.09 * -std::log(0.7), 1e-15);
}

TEST(FocalLoss, ClampsZeroAndOne) {
  EXPECT_TRUE(std::isfinite(focal_loss(0.0, 1, {})));
  EXPECT_TRUE(std::isfinite(focal_loss(1.0, 0, {})));
}

TEST(LossParams, RejectsNegativeGamma) {
  EXPECT_THROW((LossParams{-1.0, 0.25, 2.0}.validate()), ValidationError);
  EXPECT_THROW((LossParams{2.0, 1.5, 2.0}.validate()), ValidationError);
}

TEST(GiouLoss, Cases) {
  EXPECT_EQ(giou_loss({0, 0, 1, 1}, {0, 0, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(giou_loss({0, 0, 1, 1}, {2, 0, 3, 1}), 4.0 / 3.0);
  EXPECT_NEAR(giou_loss({0, 0, 1, 1}, {1e7, 1e7, 1e7 + 1, 1e7 + 1}), 2.0, 1e-9);
}

TEST(TotalLoss, NoGroundTruthIsPureBackground) {
  const std::vector<Prediction> preds = {pred({0.0, 0.0}, {0, 0, 1, 1}),
                                         pred({0.0, 0.0}, {2, 2, 3, 3})};
  EXPECT_LT(total_loss({}, preds, Assignment{}, {}), 1e-12);
  const std::vector<Prediction> noisy = {pred({0.3, 0.6}, {0, 0, 1, 1})};
  EXPECT_NEAR(total_loss({}, noisy, Assignment{}, {}),
              focal_loss(0.3, 0, {}) + focal_loss(0.6, 0, {}), 1e-15);
}

TEST(TotalLoss, PerfectForegroundAndEmptyBackground) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 10, 10}, 1}};
  const std::vector<Prediction> preds = {pred({1.0}, {0, 0, 10, 10}), pred({0.0}, {5, 5, 9, 9})};
  Assignment a;
  a.pairs = {{0, 0}};
  EXPECT_LT(total_loss(gts, preds, a, {}), 1e-9);
}

TEST(TotalLoss, TermByTermSum) {
  const LossParams lp;
  const std::vector<GroundTruth> gts = {{1, {0, 0, 10, 10}, 7}};
  const std::vector<Prediction> preds = {pred({0.2, 0.7}, {1, 1, 11, 12}),
                                         pred({0.4, 0.1}, {20, 20, 30, 30})};
  Assignment a;
  a.pairs = {{0, 0}};
  const double fg = focal_loss(0.7, 1, lp) + 2.0 * giou_loss({0, 0, 10, 10}, {1, 1, 11, 12});
  const double bg = focal_loss(0.4, 0, lp) + focal_loss(0.1, 0, lp);
  EXPECT_NEAR(total_loss(gts, preds, a, lp), fg + bg, 1e-14);
  EXPECT_NEAR(foreground_loss(gts[0], preds[0], lp), fg, 1e-15);
  EXPECT_NEAR(background_loss(preds[1], lp), bg, 1e-15);
}

TEST(TotalLoss, RejectsNonInjectiveOrOutOfRange) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 1, 1}, 1}, {0, {2, 2, 3, 3}, 2}};
  const std::vector<Prediction> preds = {pred({0.5}, {0, 0, 1, 1})};
  Assignment dup;
  dup.pairs = {{0, 0}, {1, 0}};
  EXPECT_THROW(total_loss(gts, preds, dup, {}), ValidationError);
  Assignment oob;
  oob.pairs = {{0, 3}};
  EXPECT_THROW(total_loss(gts, preds, oob, {}), ValidationError);
}

TEST(TotalLossProperty, HigherCorrectScoreLowersLoss) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 10, 10}, 1}};
  Assignment a;
  a.pairs = {{0, 0}};
  double prev = 1e300;
  for (double p = 0.05; p < 1.0; p += 0.05) {
    const std::vector<Prediction> preds = {pred({p, 0.2}, {0, 0, 9, 10}),
                                           pred({0.3, 0.3}, {4, 4, 8, 8})};
    const double l = total_loss(gts, preds, a, {});
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(TotalLossProperty, BackgroundPermutationInvariant) {
  const std::vector<GroundTruth> gts = {{0, {0, 0, 10, 10}, 1}};
  std::vector<Prediction> preds = {pred({0.8}, {0, 0, 9, 10}), pred({0.3}, {4, 4, 8, 8}),
                                   pred({0.6}, {1, 1, 2, 2}), pred({0.1}, {5, 5, 6, 9})};
  Assignment a;
  a.pairs = {{0, 0}};
  const double base = total_loss(gts, preds, a, {});
  std::swap(preds[1], preds[3]);
  std::swap(preds[2], preds[3]);
  EXPECT_NEAR(total_loss(gts, preds, a, {}), base, 1e-14);
}

}  // namespace
}  // namespace e2edet
