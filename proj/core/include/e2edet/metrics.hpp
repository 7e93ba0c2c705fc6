#pragma once

#include <span>
#include <string>
#include <vector>

#include "e2edet/dataset.hpp"

namespace e2edet {

enum class Interpolation { kCoco101, kAllPoint };

Interpolation parse_interpolation(const std::string& name);  // "101" | "all"
std::string to_string(Interpolation interp);

/// IoU thresholds .50:.05:.95, computed as numpy.linspace would.
std::vector<double> coco_iou_thresholds();

struct MatchResult {
  std::vector<char> true_positive;  // per detection, input order
  std::vector<int> matched_gt;      // per detection, -1 if unmatched
  int false_negatives = 0;
};

/// Greedy single-image matching: detections in descending score (stable), each
/// claims the unmatched same-class gt of highest IoU >= iou_thr; ties go to the
/// lower gt index.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                             double iou_thr);

/// AP of one ranked list. `true_positive` follows descending score order.
double ap_from_ranking(std::span<const char> true_positive, int num_gt, Interpolation interp);

struct EvalOptions {
  int max_dets = 100;  // per image and class
  Interpolation interp = Interpolation::kCoco101;
  double duplicate_iou = 0.5;
};

/// Mean over classes that have at least one gt. Detections refer to images by id.
double average_precision(std::span<const Detection> dets, std::span<const ImageRecord> images,
                         double iou_thr, const EvalOptions& opts = {});

/// Recall averaged over classes and the given thresholds.
double average_recall(std::span<const Detection> dets, std::span<const ImageRecord> images,
                      std::span<const double> iou_thrs, int max_dets = 100);

/// False positives whose IoU with a gt already matched by a higher-ranked
/// detection exceeds iou_thr.
int duplicate_count(std::span<const Detection> dets, std::span<const ImageRecord> images,
                    double iou_thr);

struct ClassResult {
  int category = 0;
  int num_gt = 0;
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ar = 0.0;
};

struct EvalResult {
  double mAP = 0.0;
  double AP50 = 0.0;
  double AP75 = 0.0;
  double AR = 0.0;
  int duplicate_count = 0;
  std::vector<ClassResult> per_class;  // classes with gts only
};

EvalResult evaluate(std::span<const Detection> dets, std::span<const ImageRecord> images,
                    const EvalOptions& opts = {});

std::string eval_csv(const EvalResult& r);
std::string eval_table(const EvalResult& r, const Dataset* names = nullptr);

}  // namespace e2edet
