#include "e2edet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "e2edet/error.hpp"
#include "e2edet/matching.hpp"

namespace e2edet {

void LossParams::validate() const {
  if (!(focal_gamma >= 0.0)) throw ValidationError("focal_gamma must be >= 0");
  if (!(focal_alpha >= 0.0 && focal_alpha <= 1.0)) {
    throw ValidationError("focal_alpha must lie in [0, 1]");
  }
  if (!(regression_weight >= 0.0)) throw ValidationError("regression_weight must be >= 0");
}

double focal_loss(double p, int target, const LossParams& params) {
  if (target != 0 && target != 1) throw ValidationError("focal_loss: target must be 0 or 1");
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double p_t = target == 1 ? q : 1.0 - q;
  const double alpha_t = target == 1 ? params.focal_alpha : 1.0 - params.focal_alpha;
  return -alpha_t * std::pow(1.0 - p_t, params.focal_gamma) * std::log(p_t);
}

double giou_loss(const Box& a, const Box& b) noexcept { return 1.0 - giou(a, b); }

double foreground_loss(const GroundTruth& gt, const Prediction& pred, const LossParams& params) {
  return focal_loss(pred.score_of(gt.category), 1, params) +
         params.regression_weight * giou_loss(pred.box, gt.box);
}

double background_loss(const Prediction& pred, const LossParams& params) {
  double acc = 0.0;
  for (double s : pred.scores) acc += focal_loss(s, 0, params);
  return acc;
}

double total_loss(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                  const Assignment& assignment, const LossParams& params) {
  params.validate();
  std::vector<char> foreground(preds.size(), 0);
  std::vector<char> gt_used(gts.size(), 0);
  double acc = 0.0;
  for (const auto& [g, p] : assignment.pairs) {
    if (g < 0 || static_cast<std::size_t>(g) >= gts.size() || p < 0 ||
        static_cast<std::size_t>(p) >= preds.size()) {
      throw ValidationError("total_loss: assignment index out of range");
    }
    if (foreground[static_cast<std::size_t>(p)] || gt_used[static_cast<std::size_t>(g)]) {
      throw ValidationError("total_loss: assignment is not injective");
    }
    foreground[static_cast<std::size_t>(p)] = 1;
    gt_used[static_cast<std::size_t>(g)] = 1;
    acc += foreground_loss(gts[static_cast<std::size_t>(g)], preds[static_cast<std::size_t>(p)],
                           params);
  }
  for (std::size_t j = 0; j < preds.size(); ++j) {
    if (!foreground[j]) acc += background_loss(preds[j], params);
  }
  return acc;
}

}  // namespace e2edet
