#include "e2edet/layout.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "e2edet/error.hpp"

namespace e2edet {

PyramidLayout::PyramidLayout(int image_width, int image_height, std::vector<double> strides,
                             std::vector<LevelRange> ranges)
    : image_width_(image_width),
      image_height_(image_height),
      strides_(std::move(strides)),
      ranges_(std::move(ranges)) {
  if (image_width_ <= 0 || image_height_ <= 0) {
    throw ValidationError("pyramid layout: image size must be positive");
  }
  if (strides_.empty()) throw ValidationError("pyramid layout: no levels");
  if (ranges_.size() != strides_.size()) {
    throw ValidationError("pyramid layout: need one size range per level");
  }
  for (std::size_t l = 0; l < strides_.size(); ++l) {
    if (!(strides_[l] > 0.0)) throw ValidationError("pyramid layout: stride must be positive");
    if (l > 0 && strides_[l] != 2.0 * strides_[l - 1]) {
      throw ValidationError("pyramid layout: strides must double from level to level");
    }
    if (!(ranges_[l].hi > ranges_[l].lo)) {
      throw ValidationError("pyramid layout: empty size range at level " + std::to_string(l));
    }
  }
}

PyramidLayout PyramidLayout::fcos_default(int image_width, int image_height) {
  const double inf = std::numeric_limits<double>::infinity();
  return PyramidLayout(image_width, image_height, {8, 16, 32, 64, 128},
                       {{0, 64}, {64, 128}, {128, 256}, {256, 512}, {512, inf}});
}

double PyramidLayout::stride(int level) const {
  if (level < 0 || level >= num_levels()) {
    throw ValidationError("level " + std::to_string(level) + " outside pyramid");
  }
  return strides_[static_cast<std::size_t>(level)];
}

int PyramidLayout::level_height(int level) const {
  return std::max(1, static_cast<int>(std::ceil(image_height_ / stride(level))));
}

int PyramidLayout::level_width(int level) const {
  return std::max(1, static_cast<int>(std::ceil(image_width_ / stride(level))));
}

bool PyramidLayout::valid(int level, Cell cell) const noexcept {
  if (level < 0 || level >= num_levels()) return false;
  return cell.row >= 0 && cell.col >= 0 && cell.row < level_height(level) &&
         cell.col < level_width(level);
}

Point PyramidLayout::cell_center(int level, Cell cell) const {
  const double s = stride(level);
  return {(cell.col + 0.5) * s, (cell.row + 0.5) * s};
}

namespace {

// Index i minimising |(i + 0.5) * stride - v| over [0, n); ties to the smaller index.
int nearest_index(double v, double stride, int n) {
  int i = static_cast<int>(std::floor(v / stride - 0.5));
  i = std::clamp(i, 0, n - 1);
  int best = i;
  double best_d = std::abs((i + 0.5) * stride - v);
  for (int j = i + 1; j <= std::min(i + 1, n - 1); ++j) {
    const double d = std::abs((j + 0.5) * stride - v);
    if (d < best_d) {
      best = j;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

Cell PyramidLayout::nearest_cell(int level, Point p) const {
  const double s = stride(level);
  return {nearest_index(p.y, s, level_height(level)), nearest_index(p.x, s, level_width(level))};
}

int PyramidLayout::level_for_box(const Box& box) const {
  const double size = std::max(box.width(), box.height());
  for (int l = 0; l < num_levels(); ++l) {
    if (ranges_[static_cast<std::size_t>(l)].contains(size)) return l;
  }
  return size < ranges_.front().lo ? 0 : num_levels() - 1;
}

LevelCell PyramidLayout::project(const Box& box) const {
  const int level = level_for_box(box);
  return {level, nearest_cell(level, center_of(box))};
}

Box PyramidLayout::default_anchor(int level, Cell cell) const {
  const Point c = cell_center(level, cell);
  const double half = 4.0 * stride(level);
  return {c.x - half, c.y - half, c.x + half, c.y + half};
}

}  // namespace e2edet
