#include "e2edet/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "e2edet/error.hpp"

namespace e2edet {

double Box::area() const noexcept {
  return std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1);
}

double Prediction::score_of(int category) const {
  if (category < 0 || category >= static_cast<int>(scores.size())) {
    throw ValidationError("prediction has no score for category " + std::to_string(category));
  }
  return scores[static_cast<std::size_t>(category)];
}

namespace {

double intersection_area(const Box& a, const Box& b) noexcept {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

}  // namespace

double iou(const Box& a, const Box& b) noexcept {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double giou(const Box& a, const Box& b) noexcept {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  const Box hull{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
                 std::max(a.y2, b.y2)};
  const double hull_area = hull.area();
  if (hull_area <= 0.0 || uni <= 0.0) return 0.0;
  const double value = inter / uni - (hull_area - uni) / hull_area;
  return std::clamp(value, -1.0, 1.0);
}

Point center_of(const Box& b) noexcept { return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2)}; }

bool inside_box(Point p, const Box& b) noexcept {
  return p.x >= b.x1 && p.x <= b.x2 && p.y >= b.y1 && p.y <= b.y2;
}

bool in_center_region(Point p, const Box& gt, double radius_cells, double stride) {
  if (!(stride > 0.0)) throw ValidationError("in_center_region: stride must be positive");
  if (!inside_box(p, gt)) return false;
  if (std::isinf(radius_cells)) return true;
  const Point c = center_of(gt);
  const double half = radius_cells * stride;
  return std::abs(p.x - c.x) <= half && std::abs(p.y - c.y) <= half;
}

}  // namespace e2edet
