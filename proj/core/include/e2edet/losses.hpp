#pragma once

#include <span>

#include "e2edet/geometry.hpp"

namespace e2edet {

struct Assignment;

struct LossParams {
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double regression_weight = 2.0;
  void validate() const;
  friend bool operator==(const LossParams&, const LossParams&) = default;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// -alpha_t * (1 - p_t)^gamma * log(p_t), with p clamped to [1e-7, 1 - 1e-7].
double focal_loss(double p, int target, const LossParams& params);

/// 1 - giou(a, b), in [0, 2].
double giou_loss(const Box& a, const Box& b) noexcept;

/// Foreground term for one (ground truth, prediction) pair: focal on the gt class with
/// target 1, plus regression_weight * giou_loss.
double foreground_loss(const GroundTruth& gt, const Prediction& pred, const LossParams& params);

/// Focal loss with target 0 summed over every class of `pred`.
double background_loss(const Prediction& pred, const LossParams& params);

/// Sum of foreground terms over the assigned pairs plus background terms over every
/// prediction not in the assignment's range.
double total_loss(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                  const Assignment& assignment, const LossParams& params);

}  // namespace e2edet
