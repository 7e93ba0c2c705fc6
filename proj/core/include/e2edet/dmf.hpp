#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "e2edet/pyramid.hpp"

namespace e2edet {

/// Parameters of the 3DMF head block, shared across pyramid levels.
///
/// Wiring per level s, with x the C-channel head features and z the K-channel class logits:
///   h   = groupnorm(conv3x3_{C->C}(x))
///   m   = max_filter_3d(h)            (pyramid-wide, tube over adjacent levels)
///   r   = sigmoid(conv3x3_{C->1}(x + m))
///   out = sigmoid(z) * r              (r broadcast over the K classes)
struct DmfWeights {
  int channels = 0;
  int groups = 32;
  FilterParams filter;
  std::vector<double> conv1_weight;  // [C][C][3][3]
  std::vector<double> conv1_bias;    // [C]
  std::vector<double> gn_gamma;      // [C]
  std::vector<double> gn_beta;       // [C]
  std::vector<double> conv2_weight;  // [1][C][3][3]
  std::vector<double> conv2_bias;    // [1]

  static DmfWeights zeros(int channels, int groups, FilterParams filter);
  /// Conv weights ~ U(-b, b) with b = 1/sqrt(9C); gamma ~ U(0.5, 1.5), beta ~ U(-0.5, 0.5).
  static DmfWeights random(int channels, int groups, FilterParams filter, std::uint64_t seed);

  void validate() const;

  /// All parameters in declaration order, for generic perturbation loops.
  std::vector<std::vector<double>*> blocks();
  std::vector<const std::vector<double>*> blocks() const;

  friend bool operator==(const DmfWeights&, const DmfWeights&) = default;
};

inline constexpr double kGroupNormEps = 1e-5;

FeaturePyramid dmf_forward(const FeaturePyramid& features, const FeaturePyramid& logits,
                           const DmfWeights& weights);

struct DmfGradients {
  FeaturePyramid features;
  FeaturePyramid logits;
  DmfWeights weights;
};

/// Reverse-mode gradients of sum(upstream * dmf_forward(...)).
DmfGradients dmf_backward(const FeaturePyramid& features, const FeaturePyramid& logits,
                          const DmfWeights& weights, const FeaturePyramid& upstream);

/// Forward pass that also returns the max-filter routing, used to detect kinks.
struct DmfTrace {
  FeaturePyramid output;
  std::vector<std::vector<TubeWinner>> winners;
};
DmfTrace dmf_forward_traced(const FeaturePyramid& features, const FeaturePyramid& logits,
                            const DmfWeights& weights);

// Building blocks, exposed for composition tests.
Grid conv3x3(const Grid& input, const std::vector<double>& weight,
             const std::vector<double>& bias, int out_channels);
Grid group_norm(const Grid& input, int groups, const std::vector<double>& gamma,
                const std::vector<double>& beta);
double sigmoid(double x) noexcept;

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int channels = 4;
  int classes = 2;
  int groups = 2;
  int height = 8;  // finest level
  int width = 8;
  int levels = 3;
  FilterParams filter{};
  double step = 1e-3;
  double tolerance = 1e-4;
  // Denominator of the relative error is max(|analytic|, |numeric|, floor).
  double denominator_floor = 1e-3;
  // Optional: overwrite inputs so that the max filter sees exact ties.
  bool tie_adversarial = false;
};

struct GradcheckBlock {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckBlock> blocks;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose perturbation changed the max routing
  double max_rel_error = 0.0;
  bool passed = false;
  bool tie_flagged = false;
};

/// Central-difference check of dmf_backward on a seeded random instance.
GradcheckReport gradcheck_dmf(const GradcheckOptions& options);

std::string format_report(const GradcheckReport& report);

}  // namespace e2edet
