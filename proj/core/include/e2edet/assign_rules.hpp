#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2edet/geometry.hpp"
#include "e2edet/layout.hpp"
#include "e2edet/losses.hpp"
#include "e2edet/matching.hpp"
#include "e2edet/quality.hpp"

namespace e2edet {

/// Per-prediction training targets produced by a label-assignment rule.
struct TargetSet {
  std::vector<int> gt_of_pred;            // -1 = background, otherwise gt index
  std::optional<Assignment> assignment;   // set by the one-to-one matching rules
  std::vector<int> unmatched_gts;         // gts that received no foreground sample

  explicit TargetSet(std::size_t num_preds = 0) : gt_of_pred(num_preds, -1) {}
  std::size_t foreground_count() const noexcept;
  std::vector<int> foreground_of(int gt) const;
  std::vector<int> foreground() const;
};

enum class AssignRule {
  kPoto,
  kAnchor,
  kCenter,
  kFcos,
  kAtss,
  kQualityAtss,
  kQualityFcos,
  kQualityTopk,
  kLossCost,
};

AssignRule parse_rule(std::string_view name);
std::string_view to_string(AssignRule rule) noexcept;
std::span<const AssignRule> all_rules() noexcept;
bool is_one_to_one(AssignRule rule) noexcept;

struct RuleParams {
  QualityParams quality;
  LossParams loss;
  double radius = 1.5;  // centre-sampling radius for fcos / quality_fcos
  int atss_k = 9;
  int topk_k = 9;
};

/// mean + population standard deviation; exactly the common value when all are equal.
double statistical_threshold(std::span<const double> values);

/// Quality-maximising one-to-one matching over all predictions.
TargetSet poto_assign(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                      const QualityParams& params, const PyramidLayout& layout);

/// Each gt takes the anchor with the highest IoU; contested anchors go to the gt with the
/// higher IoU and the loser moves on to its next-best anchor. Predictions without an
/// explicit anchor use layout.default_anchor.
TargetSet anchor_rule(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                      const PyramidLayout& layout);

/// Each gt takes the prediction at the cell nearest its centre on the level whose size
/// range contains its longer side. Collisions leave the later gt unmatched.
TargetSet center_rule(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                      const PyramidLayout& layout);

TargetSet fcos_o2m(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                   const PyramidLayout& layout, double radius = 1.5);

TargetSet atss_o2m(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                   const PyramidLayout& layout, int k = 9);

TargetSet quality_atss(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                       const QualityParams& params, const PyramidLayout& layout, int k = 9);

TargetSet quality_fcos(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                       const QualityParams& params, const PyramidLayout& layout,
                       double radius = 1.5);

TargetSet quality_topk(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                       const QualityParams& params, const PyramidLayout& layout, int k = 9);

TargetSet loss_cost_assign(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                           const LossParams& params);

TargetSet assign(AssignRule rule, std::span<const GroundTruth> gts,
                 std::span<const Prediction> preds, const PyramidLayout& layout,
                 const RuleParams& params);

}  // namespace e2edet
