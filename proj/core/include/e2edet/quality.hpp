#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2edet/geometry.hpp"
#include "e2edet/layout.hpp"

namespace e2edet {

enum class SpatialPrior { kCenterSampling, kInsideBox, kGlobal };
enum class Fusion { kMul, kAdd };

SpatialPrior parse_prior(std::string_view name);
std::string_view to_string(SpatialPrior prior) noexcept;
Fusion parse_fusion(std::string_view name);
std::string_view to_string(Fusion fusion) noexcept;

struct QualityParams {
  double alpha = 0.8;
  SpatialPrior prior = SpatialPrior::kCenterSampling;
  Fusion fusion = Fusion::kMul;
  double radius = 1.5;  // centre-sampling half-side, in cells of the prediction's level
  void validate() const;
  friend bool operator==(const QualityParams&, const QualityParams&) = default;
};

/// G x N matching qualities, row-major by ground truth.
struct QualityMatrix {
  int g = 0;
  int n = 0;
  std::vector<double> values;

  QualityMatrix() = default;
  QualityMatrix(int rows, int cols, double fill = 0.0);
  double& operator()(int i, int j) { return values[index(i, j)]; }
  double operator()(int i, int j) const { return values[index(i, j)]; }
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
  }
};

/// mask[i * N + j] is true iff prediction j's cell centre lies in the prior region of gt i.
std::vector<bool> spatial_prior_mask(std::span<const GroundTruth> gts,
                                     std::span<const Prediction> preds, SpatialPrior prior,
                                     const PyramidLayout& layout, double radius = 1.5);

/// Scalar quality of one pair given its classification score and IoU (prior excluded).
/// Uses 0^0 = 1 so alpha in {0, 1} is total.
double pair_quality(double score, double overlap, double alpha, Fusion fusion) noexcept;

/// mul: 1[prior] * p(c_i)^(1-alpha) * IoU^alpha;  add: 1[prior] * ((1-alpha) p(c_i) + alpha IoU).
QualityMatrix quality_matrix(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                             const QualityParams& params, const PyramidLayout& layout);

}  // namespace e2edet
