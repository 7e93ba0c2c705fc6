#pragma once

#include <cstddef>
#include <vector>

namespace e2edet {

/// Dense C x H x W scalar map, row-major with channel outermost.
struct Grid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int c, int h, int w, double fill = 0.0);

  std::size_t size() const noexcept { return values.size(); }
  std::size_t offset(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  double& at(int c, int y, int x) noexcept { return values[offset(c, y, x)]; }
  double at(int c, int y, int x) const noexcept { return values[offset(c, y, x)]; }
  bool same_shape(const Grid& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
  void validate() const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Per-level grids, finest level first; strides double from level to level.
struct FeaturePyramid {
  std::vector<Grid> levels;
  std::vector<double> strides;

  int num_levels() const noexcept { return static_cast<int>(levels.size()); }
  int channels() const noexcept { return levels.empty() ? 0 : levels.front().channels; }
  bool same_shape(const FeaturePyramid& o) const noexcept;
  void validate() const;

  /// Zero-filled pyramid with the same shape and strides.
  FeaturePyramid zeros_like() const;

  friend bool operator==(const FeaturePyramid&, const FeaturePyramid&) = default;
};

/// 3D neighbour tube: `tau` adjacent scales (tau / 2 each side) by a phi x phi window.
struct FilterParams {
  int tau = 2;
  int phi = 3;
  void validate() const;
  friend bool operator==(const FilterParams&, const FilterParams&) = default;
};

/// Half-pixel-centre interpolation taps along one axis.
struct AxisTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;  // weight of `hi`
};

AxisTaps resize_axis(int src, int dst);

/// Bilinear resize using the half-pixel-centre convention (src = (dst + 0.5) * scale - 0.5,
/// clamped to the edge).
Grid bilinear_resize(const Grid& src, int dst_h, int dst_w);

/// Adjoint of bilinear_resize: scatters `upstream` (dst-shaped) back onto a src-shaped grid.
Grid bilinear_resize_backward(const Grid& upstream, int src_h, int src_w);

/// Winner of one tube max. `index` addresses the resized grid of `level` at the output
/// level's resolution; index < 0 means a zero-padding position won.
struct TubeWinner {
  int level = -1;
  long index = -1;
  friend bool operator==(const TubeWinner&, const TubeWinner&) = default;
};

struct MaxFilterResult {
  FeaturePyramid output;
  std::vector<std::vector<TubeWinner>> winners;  // [level][element]
};

/// y[s](c, i) = max over levels k in [s - tau/2, s + tau/2] (clamped to the pyramid) of the
/// phi x phi zero-padded window around i in level k resized to level s. Ties resolve to the
/// first candidate in (level, row, col) scan order.
MaxFilterResult max_filter_3d_routed(const FeaturePyramid& p, FilterParams params);
FeaturePyramid max_filter_3d(const FeaturePyramid& p, FilterParams params);

/// Gradient of sum(upstream * max_filter_3d(p)) with respect to p.
FeaturePyramid max_filter_3d_backward(const FeaturePyramid& p, FilterParams params,
                                      const FeaturePyramid& upstream);

/// Post-processing variant: keep x where x equals its tube maximum, zero elsewhere.
FeaturePyramid hard_3dmf(const FeaturePyramid& p, FilterParams params);

}  // namespace e2edet
