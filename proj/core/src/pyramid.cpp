#include "e2edet/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "e2edet/error.hpp"

namespace e2edet {

Grid::Grid(int c, int h, int w, double fill) : channels(c), height(h), width(w) {
  if (c < 0 || h < 0 || w < 0) throw ValidationError("grid dimensions must be non-negative");
  values.assign(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
                    static_cast<std::size_t>(w),
                fill);
}

void Grid::validate() const {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ValidationError("grid must have positive dimensions");
  }
  if (values.size() != static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
                           static_cast<std::size_t>(width)) {
    throw ValidationError("grid value count does not match C*H*W");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("grid contains a non-finite value");
  }
}

bool FeaturePyramid::same_shape(const FeaturePyramid& o) const noexcept {
  if (levels.size() != o.levels.size()) return false;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (!levels[l].same_shape(o.levels[l])) return false;
  }
  return true;
}

void FeaturePyramid::validate() const {
  if (levels.empty()) throw ValidationError("feature pyramid is empty");
  if (strides.size() != levels.size()) {
    throw ValidationError("feature pyramid needs one stride per level");
  }
  for (std::size_t l = 0; l < levels.size(); ++l) {
    levels[l].validate();
    if (levels[l].channels != levels.front().channels) {
      throw ValidationError("pyramid levels disagree on channel count");
    }
    if (!(strides[l] > 0.0)) throw ValidationError("pyramid stride must be positive");
    if (l > 0 && strides[l] != 2.0 * strides[l - 1]) {
      throw ValidationError("pyramid strides must double from level " + std::to_string(l - 1) +
                            " to level " + std::to_string(l));
    }
  }
}

FeaturePyramid FeaturePyramid::zeros_like() const {
  FeaturePyramid out;
  out.strides = strides;
  out.levels.reserve(levels.size());
  for (const Grid& g : levels) out.levels.emplace_back(g.channels, g.height, g.width);
  return out;
}

void FilterParams::validate() const {
  if (phi <= 0 || phi % 2 == 0) throw ValidationError("filter phi must be odd and positive");
  if (tau < 0 || tau % 2 != 0) throw ValidationError("filter tau must be even and non-negative");
}

AxisTaps resize_axis(int src, int dst) {
  AxisTaps taps;
  taps.lo.resize(static_cast<std::size_t>(dst));
  taps.hi.resize(static_cast<std::size_t>(dst));
  taps.frac.resize(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    if (s < 0.0) s = 0.0;
    int lo = static_cast<int>(std::floor(s));
    double frac = s - lo;
    if (lo >= src - 1) {
      lo = src - 1;
      frac = 0.0;
    }
    const auto k = static_cast<std::size_t>(i);
    taps.lo[k] = lo;
    taps.hi[k] = std::min(lo + 1, src - 1);
    taps.frac[k] = frac;
  }
  return taps;
}

Grid bilinear_resize(const Grid& src, int dst_h, int dst_w) {
  if (src.channels <= 0 || src.height <= 0 || src.width <= 0 || src.values.empty()) {
    throw ValidationError("bilinear_resize: empty source grid");
  }
  if (dst_h < 1 || dst_w < 1) throw ValidationError("bilinear_resize: target size must be >= 1");
  if (dst_h == src.height && dst_w == src.width) return src;

  const AxisTaps ty = resize_axis(src.height, dst_h);
  const AxisTaps tx = resize_axis(src.width, dst_w);
  Grid out(src.channels, dst_h, dst_w);
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < dst_h; ++y) {
      const auto yk = static_cast<std::size_t>(y);
      const double ly = ty.frac[yk];
      for (int x = 0; x < dst_w; ++x) {
        const auto xk = static_cast<std::size_t>(x);
        const double lx = tx.frac[xk];
        const double v00 = src.at(c, ty.lo[yk], tx.lo[xk]);
        const double v01 = src.at(c, ty.lo[yk], tx.hi[xk]);
        const double v10 = src.at(c, ty.hi[yk], tx.lo[xk]);
        const double v11 = src.at(c, ty.hi[yk], tx.hi[xk]);
        out.at(c, y, x) =
            (1.0 - ly) * ((1.0 - lx) * v00 + lx * v01) + ly * ((1.0 - lx) * v10 + lx * v11);
      }
    }
  }
  return out;
}

Grid bilinear_resize_backward(const Grid& upstream, int src_h, int src_w) {
  Grid grad(upstream.channels, src_h, src_w);
  if (upstream.height == src_h && upstream.width == src_w) {
    grad.values = upstream.values;
    return grad;
  }
  const AxisTaps ty = resize_axis(src_h, upstream.height);
  const AxisTaps tx = resize_axis(src_w, upstream.width);
  for (int c = 0; c < upstream.channels; ++c) {
    for (int y = 0; y < upstream.height; ++y) {
      const auto yk = static_cast<std::size_t>(y);
      const double ly = ty.frac[yk];
      for (int x = 0; x < upstream.width; ++x) {
        const auto xk = static_cast<std::size_t>(x);
        const double lx = tx.frac[xk];
        const double g = upstream.at(c, y, x);
        if (g == 0.0) continue;
        grad.at(c, ty.lo[yk], tx.lo[xk]) += g * (1.0 - ly) * (1.0 - lx);
        grad.at(c, ty.lo[yk], tx.hi[xk]) += g * (1.0 - ly) * lx;
        grad.at(c, ty.hi[yk], tx.lo[xk]) += g * ly * (1.0 - lx);
        grad.at(c, ty.hi[yk], tx.hi[xk]) += g * ly * lx;
      }
    }
  }
  return grad;
}

namespace {

struct LevelSpan {
  int lo;
  int hi;
};

LevelSpan tube_levels(int s, int num_levels, int tau) {
  return {std::max(0, s - tau / 2), std::min(num_levels - 1, s + tau / 2)};
}

void check_filter_input(const FeaturePyramid& p, FilterParams params) {
  params.validate();
  if (p.levels.empty()) throw ValidationError("max_filter_3d: empty pyramid");
  for (const Grid& g : p.levels) {
    if (g.channels != p.levels.front().channels) {
      throw ValidationError("max_filter_3d: levels disagree on channel count");
    }
    if (g.height <= 0 || g.width <= 0 || g.size() == 0) {
      throw ValidationError("max_filter_3d: empty level");
    }
  }
}

}  // namespace

MaxFilterResult max_filter_3d_routed(const FeaturePyramid& p, FilterParams params) {
  check_filter_input(p, params);
  const int num_levels = p.num_levels();
  const int r = params.phi / 2;

  MaxFilterResult result;
  result.output = p.zeros_like();
  result.winners.resize(static_cast<std::size_t>(num_levels));

  for (int s = 0; s < num_levels; ++s) {
    const Grid& here = p.levels[static_cast<std::size_t>(s)];
    const LevelSpan span = tube_levels(s, num_levels, params.tau);
    std::vector<Grid> resized;
    for (int k = span.lo; k <= span.hi; ++k) {
      resized.push_back(bilinear_resize(p.levels[static_cast<std::size_t>(k)], here.height,
                                        here.width));
    }

    Grid& out = result.output.levels[static_cast<std::size_t>(s)];
    auto& winners = result.winners[static_cast<std::size_t>(s)];
    winners.assign(here.size(), TubeWinner{});
    for (int c = 0; c < here.channels; ++c) {
      for (int y = 0; y < here.height; ++y) {
        for (int x = 0; x < here.width; ++x) {
          bool first = true;
          double best = 0.0;
          TubeWinner win;
          for (int k = span.lo; k <= span.hi; ++k) {
            const Grid& g = resized[static_cast<std::size_t>(k - span.lo)];
            for (int yy = y - r; yy <= y + r; ++yy) {
              for (int xx = x - r; xx <= x + r; ++xx) {
                const bool in = yy >= 0 && yy < g.height && xx >= 0 && xx < g.width;
                const double v = in ? g.at(c, yy, xx) : 0.0;
                if (first || v > best) {
                  first = false;
                  best = v;
                  win = {k, in ? static_cast<long>(g.offset(c, yy, xx)) : -1L};
                }
              }
            }
          }
          const std::size_t o = here.offset(c, y, x);
          out.values[o] = best;
          winners[o] = win;
        }
      }
    }
  }
  return result;
}

FeaturePyramid max_filter_3d(const FeaturePyramid& p, FilterParams params) {
  return max_filter_3d_routed(p, params).output;
}

FeaturePyramid max_filter_3d_backward(const FeaturePyramid& p, FilterParams params,
                                      const FeaturePyramid& upstream) {
  if (!upstream.same_shape(p)) throw ValidationError("max_filter_3d_backward: shape mismatch");
  const MaxFilterResult routed = max_filter_3d_routed(p, params);
  const int num_levels = p.num_levels();
  FeaturePyramid grad = p.zeros_like();

  for (int s = 0; s < num_levels; ++s) {
    const Grid& here = p.levels[static_cast<std::size_t>(s)];
    const LevelSpan span = tube_levels(s, num_levels, params.tau);
    // Gradient w.r.t. each resized map at level s resolution, then pulled back through resize.
    std::vector<Grid> resized_grad;
    for (int k = span.lo; k <= span.hi; ++k) {
      resized_grad.emplace_back(here.channels, here.height, here.width);
    }
    const auto& winners = routed.winners[static_cast<std::size_t>(s)];
    const Grid& up = upstream.levels[static_cast<std::size_t>(s)];
    for (std::size_t i = 0; i < winners.size(); ++i) {
      const TubeWinner& w = winners[i];
      if (w.index < 0) continue;
      resized_grad[static_cast<std::size_t>(w.level - span.lo)]
          .values[static_cast<std::size_t>(w.index)] += up.values[i];
    }
    for (int k = span.lo; k <= span.hi; ++k) {
      const Grid& src = p.levels[static_cast<std::size_t>(k)];
      const Grid back = bilinear_resize_backward(
          resized_grad[static_cast<std::size_t>(k - span.lo)], src.height, src.width);
      Grid& dst = grad.levels[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < dst.values.size(); ++i) dst.values[i] += back.values[i];
    }
  }
  return grad;
}

FeaturePyramid hard_3dmf(const FeaturePyramid& p, FilterParams params) {
  FeaturePyramid filtered = max_filter_3d(p, params);
  for (std::size_t l = 0; l < p.levels.size(); ++l) {
    const auto& in = p.levels[l].values;
    auto& out = filtered.levels[l].values;
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] == out[i]) ? in[i] : 0.0;
  }
  return filtered;
}

}  // namespace e2edet
