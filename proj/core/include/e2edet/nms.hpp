#pragma once

#include <span>
#include <string>
#include <vector>

#include "e2edet/dataset.hpp"

namespace e2edet {

/// Window size meaning "no spatial restriction".
inline constexpr int kUnboundedRange = 0;

struct NmsConfig {
  double iou_threshold = 0.6;
  bool across_scales = true;
  int spatial_range = kUnboundedRange;  // odd window side in cells, or kUnboundedRange
  double score_floor = 0.05;

  bool bounded() const noexcept { return spatial_range != kUnboundedRange; }
  void validate() const;
  /// "inf" or the window side, e.g. "3".
  std::string range_label() const;
  friend bool operator==(const NmsConfig&, const NmsConfig&) = default;
};

/// Class-wise greedy suppression. A candidate is removed when a kept detection of
/// the same image and class overlaps it with IoU > threshold and, for restricted
/// configs, shares its level and/or lies inside the survivor-centred window.
/// Detections scoring below the floor are dropped. Returns kept indices in
/// processing order: (-score, level, row, col, index).
/// `strides` maps level to stride; required only when a bounded window spans levels.
std::vector<int> greedy_nms(std::span<const Detection> dets, const NmsConfig& cfg,
                            std::span<const double> strides = {});

std::vector<Detection> apply_nms(std::span<const Detection> dets, const NmsConfig& cfg,
                                 std::span<const double> strides = {});

/// The restricted configurations compared in the NMS study: per-scale windows
/// 1, 3, 5 and unbounded, then across-scales unbounded.
std::vector<NmsConfig> study_configs(double iou_threshold = 0.6);

}  // namespace e2edet
