#include "e2edet/nms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <utility>

#include "e2edet/error.hpp"

namespace e2edet {

void NmsConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ValidationError("nms iou_threshold must lie in (0, 1]");
  }
  if (spatial_range != kUnboundedRange && (spatial_range < 1 || spatial_range % 2 == 0)) {
    throw ValidationError("nms spatial_range must be odd and positive, or unbounded");
  }
  if (!std::isfinite(score_floor)) throw ValidationError("nms score_floor must be finite");
}

std::string NmsConfig::range_label() const {
  return bounded() ? std::to_string(spatial_range) : std::string("inf");
}

namespace {

// Row/col on `level` of the cell containing the centre of `cell` on `from`.
Cell project_cell(Cell cell, int from, int level, std::span<const double> strides) {
  const double sf = strides[static_cast<std::size_t>(from)];
  const double st = strides[static_cast<std::size_t>(level)];
  return {static_cast<int>(std::floor((cell.row + 0.5) * sf / st)),
          static_cast<int>(std::floor((cell.col + 0.5) * sf / st))};
}

bool may_suppress(const Detection& keep, const Detection& cand, const NmsConfig& cfg,
                  std::span<const double> strides) {
  if (keep.image_id != cand.image_id || keep.category != cand.category) return false;
  if (!cfg.across_scales && keep.level != cand.level) return false;
  if (cfg.bounded()) {
    const Cell c = keep.level == cand.level
                       ? cand.cell
                       : project_cell(cand.cell, cand.level, keep.level, strides);
    const int half = cfg.spatial_range / 2;
    if (std::abs(c.row - keep.cell.row) > half || std::abs(c.col - keep.cell.col) > half) {
      return false;
    }
  }
  return iou(keep.box, cand.box) > cfg.iou_threshold;
}

}  // namespace

std::vector<int> greedy_nms(std::span<const Detection> dets, const NmsConfig& cfg,
                            std::span<const double> strides) {
  cfg.validate();
  const bool needs_location = cfg.bounded() || !cfg.across_scales;
  for (const Detection& d : dets) {
    if (!std::isfinite(d.score)) throw ValidationError("nms: detection score is not finite");
    if (needs_location && !d.has_location()) {
      throw ValidationError("nms: restricted configs need level and cell on every detection");
    }
    if (cfg.bounded() && cfg.across_scales &&
        (d.level >= static_cast<int>(strides.size()))) {
      throw ValidationError("nms: missing stride for level " + std::to_string(d.level));
    }
  }

  std::vector<int> order;
  order.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].score >= cfg.score_floor) order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const Detection& x = dets[static_cast<std::size_t>(a)];
    const Detection& y = dets[static_cast<std::size_t>(b)];
    if (x.score != y.score) return x.score > y.score;
    if (x.level != y.level) return x.level < y.level;
    return x.cell < y.cell;
  });

  // Bucket by (image, class) so the quadratic scan stays local.
  std::map<std::pair<int, int>, std::vector<int>> buckets;
  for (int i : order) {
    const Detection& d = dets[static_cast<std::size_t>(i)];
    buckets[{d.image_id, d.category}].push_back(i);
  }
  std::vector<char> kept_flag(dets.size(), 0);
  for (auto& [key, members] : buckets) {
    std::vector<int> kept;
    for (int i : members) {
      const Detection& cand = dets[static_cast<std::size_t>(i)];
      const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](int k) {
        return may_suppress(dets[static_cast<std::size_t>(k)], cand, cfg, strides);
      });
      if (!suppressed) {
        kept.push_back(i);
        kept_flag[static_cast<std::size_t>(i)] = 1;
      }
    }
  }
  std::vector<int> out;
  for (int i : order) {
    if (kept_flag[static_cast<std::size_t>(i)] != 0) out.push_back(i);
  }
  return out;
}

std::vector<Detection> apply_nms(std::span<const Detection> dets, const NmsConfig& cfg,
                                 std::span<const double> strides) {
  std::vector<Detection> out;
  for (int i : greedy_nms(dets, cfg, strides)) out.push_back(dets[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<NmsConfig> study_configs(double iou_threshold) {
  std::vector<NmsConfig> cfgs;
  for (int range : {1, 3, 5, kUnboundedRange}) {
    cfgs.push_back({iou_threshold, false, range, 0.05});
  }
  cfgs.push_back({iou_threshold, true, kUnboundedRange, 0.05});
  return cfgs;
}

}  // namespace e2edet
