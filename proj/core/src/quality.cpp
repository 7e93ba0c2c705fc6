#include "e2edet/quality.hpp"

#include <cmath>
#include <limits>

#include "e2edet/error.hpp"

namespace e2edet {

SpatialPrior parse_prior(std::string_view name) {
  if (name == "center_sampling" || name == "center") return SpatialPrior::kCenterSampling;
  if (name == "inside_box") return SpatialPrior::kInsideBox;
  if (name == "global") return SpatialPrior::kGlobal;
  throw ValidationError("unknown spatial prior '" + std::string(name) +
                        "' (expected center_sampling, inside_box or global)");
}

std::string_view to_string(SpatialPrior prior) noexcept {
  switch (prior) {
    case SpatialPrior::kCenterSampling: return "center_sampling";
    case SpatialPrior::kInsideBox: return "inside_box";
    case SpatialPrior::kGlobal: return "global";
  }
  return "?";
}

Fusion parse_fusion(std::string_view name) {
  if (name == "mul") return Fusion::kMul;
  if (name == "add") return Fusion::kAdd;
  throw ValidationError("unknown fusion '" + std::string(name) + "' (expected mul or add)");
}

std::string_view to_string(Fusion fusion) noexcept {
  return fusion == Fusion::kMul ? "mul" : "add";
}

void QualityParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("quality alpha must lie in [0, 1]");
  if (!(radius > 0.0)) throw ValidationError("centre-sampling radius must be positive");
}

QualityMatrix::QualityMatrix(int rows, int cols, double fill) : g(rows), n(cols) {
  if (rows < 0 || cols < 0) throw ValidationError("quality matrix dimensions must be >= 0");
  values.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
}

std::vector<bool> spatial_prior_mask(std::span<const GroundTruth> gts,
                                     std::span<const Prediction> preds, SpatialPrior prior,
                                     const PyramidLayout& layout, double radius) {
  std::vector<bool> mask(gts.size() * preds.size(), prior == SpatialPrior::kGlobal);
  if (prior == SpatialPrior::kGlobal) return mask;
  const double r =
      prior == SpatialPrior::kInsideBox ? std::numeric_limits<double>::infinity() : radius;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const Point loc = layout.cell_center(preds[j].level, preds[j].cell);
    const double stride = layout.stride(preds[j].level);
    for (std::size_t i = 0; i < gts.size(); ++i) {
      mask[i * preds.size() + j] = in_center_region(loc, gts[i].box, r, stride);
    }
  }
  return mask;
}

double pair_quality(double score, double overlap, double alpha, Fusion fusion) noexcept {
  if (fusion == Fusion::kAdd) return (1.0 - alpha) * score + alpha * overlap;
  // std::pow(0, 0) == 1, which is the convention we want at the alpha endpoints.
  return std::pow(score, 1.0 - alpha) * std::pow(overlap, alpha);
}

QualityMatrix quality_matrix(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                             const QualityParams& params, const PyramidLayout& layout) {
  params.validate();
  const auto mask = spatial_prior_mask(gts, preds, params.prior, layout, params.radius);
  QualityMatrix q(static_cast<int>(gts.size()), static_cast<int>(preds.size()));
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (std::size_t j = 0; j < preds.size(); ++j) {
      if (!mask[i * preds.size() + j]) continue;
      const double score = preds[j].score_of(gts[i].category);
      if (score < 0.0 || score > 1.0) throw ValidationError("quality: score outside [0, 1]");
      const double overlap = iou(gts[i].box, preds[j].box);
      q(static_cast<int>(i), static_cast<int>(j)) =
          pair_quality(score, overlap, params.alpha, params.fusion);
    }
  }
  return q;
}

}  // namespace e2edet
