#pragma once

#include <limits>
#include <vector>

#include "e2edet/geometry.hpp"

namespace e2edet {

/// Object-size interval [lo, hi) handled by one pyramid level.
struct LevelRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double v) const noexcept { return v >= lo && v < hi; }
  friend bool operator==(const LevelRange&, const LevelRange&) = default;
};

struct LevelCell {
  int level = 0;
  Cell cell;
  friend bool operator==(const LevelCell&, const LevelCell&) = default;
};

/// Geometry of an FPN head: image size, per-level strides (finest first, each
/// level doubling the previous) and the FCOS-style size range of each level.
class PyramidLayout {
 public:
  PyramidLayout() = default;
  PyramidLayout(int image_width, int image_height, std::vector<double> strides,
                std::vector<LevelRange> ranges);

  /// Strides 8..128 with ranges (0,64),(64,128),(128,256),(256,512),(512,inf).
  static PyramidLayout fcos_default(int image_width, int image_height);

  int num_levels() const noexcept { return static_cast<int>(strides_.size()); }
  int image_width() const noexcept { return image_width_; }
  int image_height() const noexcept { return image_height_; }
  double stride(int level) const;
  const std::vector<double>& strides() const noexcept { return strides_; }
  const std::vector<LevelRange>& ranges() const noexcept { return ranges_; }
  int level_height(int level) const;
  int level_width(int level) const;
  bool valid(int level, Cell cell) const noexcept;

  /// Image-plane location a cell's prediction is attributed to.
  Point cell_center(int level, Cell cell) const;

  /// Cell whose centre is nearest `p` on `level`; per-axis ties go to the smaller index.
  Cell nearest_cell(int level, Point p) const;

  /// Level whose range contains the longer side of `box`.
  int level_for_box(const Box& box) const;

  /// Center-rule projection: level by size, then nearest cell to the box centre.
  LevelCell project(const Box& box) const;

  /// ATSS-style square anchor (side 8 * stride) centred on a cell.
  Box default_anchor(int level, Cell cell) const;

  friend bool operator==(const PyramidLayout&, const PyramidLayout&) = default;

 private:
  int image_width_ = 0;
  int image_height_ = 0;
  std::vector<double> strides_;
  std::vector<LevelRange> ranges_;
};

}  // namespace e2edet
