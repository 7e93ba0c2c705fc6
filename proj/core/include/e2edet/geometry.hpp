#pragma once

#include <optional>
#include <vector>

namespace e2edet {

/// Axis-aligned box in corner form, continuous pixel coordinates.
/// Areas use (x2 - x1) * (y2 - y1) with no +1 term.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept;
  bool degenerate() const noexcept { return !(x2 > x1) || !(y2 > y1); }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Grid index inside one pyramid level.
struct Cell {
  int row = -1;
  int col = -1;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct GroundTruth {
  int category = 0;  // contiguous class index in [0, num_classes)
  Box box;
  int id = 0;  // stable key, e.g. the COCO annotation id

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// One dense-head output location: per-class probabilities plus a regressed box.
struct Prediction {
  std::vector<double> scores;
  Box box;
  int level = 0;
  Cell cell;
  std::optional<Box> anchor;

  double score_of(int category) const;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

double iou(const Box& a, const Box& b) noexcept;

/// Generalized IoU in [-1, 1]. Two degenerate boxes give 0.
double giou(const Box& a, const Box& b) noexcept;

Point center_of(const Box& b) noexcept;

bool inside_box(Point p, const Box& b) noexcept;

/// True iff `p` lies in the square of half-side radius_cells * stride around the
/// centre of `gt`, clipped to `gt`. An infinite radius reduces to inside_box.
bool in_center_region(Point p, const Box& gt, double radius_cells, double stride);

}  // namespace e2edet
