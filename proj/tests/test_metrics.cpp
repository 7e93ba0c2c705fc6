#include <gtest/gtest.h>

#include <cmath>

#include "e2edet/error.hpp"
#include "e2edet/metrics.hpp"
#include "support/oracles.hpp"

namespace e2edet {
namespace {

using testing::make_det;
using testing::make_image;

const GroundTruth kGtA{0, {0, 0, 10, 10}, 1};
const GroundTruth kGtB{0, {50, 50, 60, 60}, 2};

// two gts; TP 0.9, duplicate 0.85, TP 0.8
std::vector<Detection> duplicate_case() {
  return {make_det(1, 0, kGtA.box, 0.9), make_det(1, 0, {0, 0, 10, 9}, 0.85),
          make_det(1, 0, kGtB.box, 0.8)};
}

TEST(Interpolation, Names) {
  EXPECT_EQ(parse_interpolation("101"), Interpolation::kCoco101);
  EXPECT_EQ(parse_interpolation("all"), Interpolation::kAllPoint);
  EXPECT_THROW(parse_interpolation("11"), ValidationError);
}

TEST(Thresholds, CocoGrid) {
  const auto t = coco_iou_thresholds();
  ASSERT_EQ(t.size(), 10u);
  EXPECT_EQ(t.front(), 0.5);
  EXPECT_EQ(t.back(), 0.95);
  EXPECT_NEAR(t[5], 0.75, 1e-15);
}

TEST(Match, ExactDetsAllTrue) {
  const std::vector<GroundTruth> gts = {kGtA, kGtB};
  const std::vector<Detection> dets = {make_det(1, 0, kGtB.box, 0.5), make_det(1, 0, kGtA.box, 0.6)};
  const MatchResult m = match_detections(dets, gts, 0.5);
  EXPECT_EQ(m.true_positive, (std::vector<char>{1, 1}));
  EXPECT_EQ(m.matched_gt, (std::vector<int>{1, 0}));
  EXPECT_EQ(m.false_negatives, 0);
}

TEST(Match, NoDetsAllMissed) {
  const std::vector<GroundTruth> gts = {kGtA, kGtB};
  EXPECT_EQ(match_detections({}, gts, 0.5).false_negatives, 2);
}

TEST(Match, DuplicateIsFalsePositive) {
  const std::vector<GroundTruth> gts = {kGtA, kGtB};
  const auto dets = duplicate_case();
  const MatchResult m = match_detections(dets, gts, 0.5);
  EXPECT_EQ(m.true_positive, (std::vector<char>{1, 0, 1}));
  EXPECT_EQ(m.matched_gt, (std::vector<int>{0, -1, 1}));
  EXPECT_EQ(m.false_negatives, 0);
}

TEST(Match, ClassMustAgree) {
  const std::vector<GroundTruth> gts = {kGtA};
  const std::vector<Detection> dets = {make_det(1, 1, kGtA.box, 0.9)};
  EXPECT_EQ(match_detections(dets, gts, 0.5).false_negatives, 1);
}

TEST(ApFromRanking, HandCases) {
  const std::vector<char> tp = {1, 0, 1};
  EXPECT_NEAR(ap_from_ranking(tp, 2, Interpolation::kAllPoint), 0.5 + 0.5 * 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(ap_from_ranking(tp, 2, Interpolation::kCoco101), (51.0 + 50.0 * 2.0 / 3.0) / 101.0, 1e-12);
  EXPECT_EQ(ap_from_ranking(std::vector<char>{1}, 1, Interpolation::kCoco101), 1.0);
  EXPECT_EQ(ap_from_ranking(std::vector<char>{0, 0}, 3, Interpolation::kCoco101), 0.0);
  EXPECT_THROW(ap_from_ranking({}, 0, Interpolation::kAllPoint), ValidationError);
}

TEST(AveragePrecision, TrivialCases) {
  const std::vector<ImageRecord> one = {make_image(1, {kGtA})};
  EXPECT_EQ(average_precision(std::vector<Detection>{make_det(1, 0, kGtA.box, 0.7)}, one, 0.5), 1.0);
  EXPECT_EQ(average_precision(std::vector<Detection>{make_det(1, 0, kGtB.box, 0.7)}, one, 0.5), 0.0);
  EXPECT_EQ(average_precision({}, one, 0.5), 0.0);
}

TEST(AveragePrecision, DuplicateHandCase) {
  const std::vector<ImageRecord> images = {make_image(1, {kGtA, kGtB})};
  const auto dets = duplicate_case();
  EvalOptions all;
  all.interp = Interpolation::kAllPoint;
  EXPECT_NEAR(average_precision(dets, images, 0.5, all), 0.8333333333333333, 1e-12);
  EXPECT_NEAR(average_precision(dets, images, 0.5), (51.0 + 100.0 / 3.0) / 101.0, 1e-12);
}

TEST(AveragePrecision, ClassesWithoutGtsAreExcluded) {
  const std::vector<ImageRecord> images = {make_image(1, {kGtA})};
  const std::vector<Detection> dets = {make_det(1, 0, kGtA.box, 0.9), make_det(1, 2, kGtB.box, 0.9)};
  EXPECT_EQ(average_precision(dets, images, 0.5), 1.0);
}

TEST(AveragePrecision, MaxDetsTruncatesPerImageAndClass) {
  const std::vector<ImageRecord> images = {make_image(1, {kGtA})};
  std::vector<Detection> dets = {make_det(1, 0, kGtB.box, 0.9), make_det(1, 0, kGtA.box, 0.8)};
  EvalOptions o;
  o.max_dets = 1;
  EXPECT_EQ(average_precision(dets, images, 0.5, o), 0.0);
  o.max_dets = 2;
  EXPECT_GT(average_precision(dets, images, 0.5, o), 0.0);
}

TEST(AverageRecall, Cases) {
  const std::vector<ImageRecord> images = {make_image(1, {kGtA, kGtB})};
  const auto thr = coco_iou_thresholds();
  EXPECT_EQ(average_recall(std::vector<Detection>{make_det(1, 0, kGtA.box, 0.9), make_det(1, 0, kGtB.box, 0.9)},
                           images, thr),
            1.0);
  EXPECT_EQ(average_recall({}, images, thr), 0.0);
  const std::vector<double> half = {0.5};
  EXPECT_EQ(average_recall(std::vector<Detection>{make_det(1, 0, kGtA.box, 0.9)}, images, half), 0.5);
}

TEST(DuplicateCount, Cases) {
  const std::vector<ImageRecord> images = {make_image(1, {kGtA, kGtB})};
  EXPECT_EQ(duplicate_count(std::vector<Detection>{make_det(1, 0, kGtA.box, 0.9), make_det(1, 0, kGtB.box, 0.8)},
                            images, 0.5),
            0);
  std::vector<Detection> copies;
  for (int k = 0; k < 4; ++k) {
    copies.push_back(make_det(1, 0, kGtA.box, 0.9 - 0.1 * k));
    copies.push_back(make_det(1, 0, kGtB.box, 0.85 - 0.1 * k));
  }
  EXPECT_EQ(duplicate_count(copies, images, 0.5), 3 * 2);
  // mixed: one duplicate of A (IoU 0.9), one background FP, one loose box on A (IoU 0.25)
  const std::vector<Detection> mixed = {make_det(1, 0, kGtA.box, 0.9), make_det(1, 0, {0, 0, 10, 9}, 0.8),
                                        make_det(1, 0, {200, 200, 210, 210}, 0.7),
                                        make_det(1, 0, {0, 0, 5, 5}, 0.6)};
  EXPECT_EQ(duplicate_count(mixed, images, 0.5), 1);
  EXPECT_EQ(duplicate_count(mixed, images, 0.2), 2);
}

TEST(Evaluate, PerfectSetAndCsv) {
  const std::vector<ImageRecord> images = {make_image(1, {kGtA, kGtB}), make_image(2, {{1, {5, 5, 30, 40}, 3}})};
  const std::vector<Detection> dets = {make_det(1, 0, kGtA.box, 0.9), make_det(1, 0, kGtB.box, 0.9),
                                       make_det(2, 1, {5, 5, 30, 40}, 0.4)};
  const EvalResult r = evaluate(dets, images);
  EXPECT_EQ(r.mAP, 1.0);
  EXPECT_EQ(r.AP50, 1.0);
  EXPECT_EQ(r.AP75, 1.0);
  EXPECT_EQ(r.AR, 1.0);
  EXPECT_EQ(r.duplicate_count, 0);
  ASSERT_EQ(r.per_class.size(), 2u);
  EXPECT_EQ(r.per_class[1].num_gt, 1);
  const std::string csv = eval_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scope,category,num_gt,mAP,AP50,AP75,AR,duplicates");
  EXPECT_NE(csv.find("1.000000"), std::string::npos);
  EXPECT_FALSE(eval_table(r).empty());
}

// ---- properties -------------------------------------------------------------

struct RandomEval {
  std::vector<ImageRecord> images;
  std::vector<Detection> dets;
};

RandomEval random_eval(Rng& rng) {
  RandomEval e;
  for (int im = 1; im <= 3; ++im) {
    std::vector<GroundTruth> gts;
    const int g = static_cast<int>(rng.uniform_int(0, 4));
    for (int i = 0; i < g; ++i) gts.push_back({static_cast<int>(rng.uniform_int(0, 1)), testing::random_box(rng, 100, 5, 40), i});
    for (const GroundTruth& gt : gts) {
      const int copies = static_cast<int>(rng.uniform_int(0, 2));
      for (int k = 0; k < copies; ++k) {
        Box b = gt.box;
        const double j = rng.uniform(-3, 3);
        b.x1 += j;
        b.x2 += j;
        e.dets.push_back(make_det(im, gt.category, b, rng.uniform(0.05, 1.0)));
      }
    }
    const int extra = static_cast<int>(rng.uniform_int(0, 3));
    for (int k = 0; k < extra; ++k) {
      e.dets.push_back(make_det(im, static_cast<int>(rng.uniform_int(0, 1)), testing::random_box(rng, 100, 5, 40), rng.uniform(0.05, 1.0)));
    }
    e.images.push_back(make_image(im, std::move(gts)));
  }
  return e;
}

TEST(MetricsProperty, MonotoneRescaleInvariance) {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const RandomEval e = random_eval(rng);
    std::vector<Detection> scaled = e.dets;
    for (Detection& d : scaled) d.score = 0.5 * d.score * d.score + 0.01;
    const EvalResult a = evaluate(e.dets, e.images);
    const EvalResult b = evaluate(scaled, e.images);
    EXPECT_EQ(a.mAP, b.mAP);
    EXPECT_EQ(a.AR, b.AR);
    EXPECT_EQ(a.duplicate_count, b.duplicate_count);
  }
}

TEST(MetricsProperty, AddingDetectionNeverRaisesMisses) {
  Rng rng(32);
  for (int t = 0; t < 300; ++t) {
    std::vector<GroundTruth> gts;
    for (int i = 0; i < 4; ++i) gts.push_back({0, testing::random_box(rng, 100, 5, 40), i});
    std::vector<Detection> dets;
    for (int k = 0; k < 5; ++k) dets.push_back(make_det(1, 0, testing::random_box(rng, 100, 5, 40), rng.uniform()));
    const int before = match_detections(dets, gts, 0.3).false_negatives;
    dets.push_back(make_det(1, 0, testing::random_box(rng, 100, 5, 40), rng.uniform()));
    EXPECT_LE(match_detections(dets, gts, 0.3).false_negatives, before);
  }
}

TEST(MetricsProperty, PerfectSetIsExactlyOne) {
  Rng rng(33);
  for (int t = 0; t < 100; ++t) {
    RandomEval e = random_eval(rng);
    e.dets.clear();
    bool any = false;
    for (const ImageRecord& im : e.images) {
      for (const GroundTruth& gt : im.gts) {
        e.dets.push_back(make_det(im.id, gt.category, gt.box, rng.uniform()));
        any = true;
      }
    }
    if (!any) continue;
    EXPECT_EQ(average_precision(e.dets, e.images, 0.5), 1.0);
  }
}

TEST(MetricsProperty, ResultsInRange) {
  Rng rng(34);
  for (int t = 0; t < 100; ++t) {
    const RandomEval e = random_eval(rng);
    const EvalResult r = evaluate(e.dets, e.images);
    for (double v : {r.mAP, r.AP50, r.AP75, r.AR}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(r.duplicate_count, 0);
  }
}

}  // namespace
}  // namespace e2edet
