#include "e2edet/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "e2edet/error.hpp"
#include "e2edet/rng.hpp"

namespace e2edet {

void SceneConfig::validate() const {
  if (image_size < 32) throw ValidationError("scene image_size must be at least 32");
  if (min_instances < 0 || max_instances < min_instances) {
    throw ValidationError("scene instance range must satisfy 0 <= min <= max");
  }
  if (!(min_size > 0.0) || !(max_size >= min_size) || max_size > image_size) {
    throw ValidationError("scene size range must satisfy 0 < min <= max <= image_size");
  }
  if (!(crowding >= 0.0 && crowding < 1.0)) throw ValidationError("crowding must lie in [0, 1)");
  if (num_classes < 1) throw ValidationError("num_classes must be positive");
}

void OracleConfig::validate() const {
  if (duplicates < 1) throw ValidationError("oracle duplicates must be at least 1");
  if (!(decay > 0.0 && decay <= 1.0)) throw ValidationError("oracle decay must lie in (0, 1]");
  if (!(jitter >= 0.0 && jitter < 0.5)) throw ValidationError("oracle jitter must lie in [0, 0.5)");
  if (!(loc_noise >= 0.0 && loc_noise < 0.5)) {
    throw ValidationError("oracle loc_noise must lie in [0, 0.5)");
  }
  for (double p : {cross_level_prob, far_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("oracle probabilities must lie in [0, 1]");
  }
  if (!(min_score > 0.0 && min_score <= max_score && max_score <= 1.0)) {
    throw ValidationError("oracle scores must satisfy 0 < min_score <= max_score <= 1");
  }
}

namespace {

constexpr double kQuantum = 16.0;

double quantize(double v) { return std::round(v * kQuantum) / kQuantum; }

bool overlaps_any(const Box& b, const std::vector<GroundTruth>& gts) {
  return std::any_of(gts.begin(), gts.end(), [&](const GroundTruth& g) {
    return b.x1 < g.box.x2 && g.box.x1 < b.x2 && b.y1 < g.box.y2 && g.box.y1 < b.y2;
  });
}

ImageRecord gen_scene(const SceneConfig& cfg, int image_id, int& next_gt_id) {
  Rng rng(cfg.seed, static_cast<std::uint64_t>(image_id));
  ImageRecord im;
  im.id = image_id;
  im.width = cfg.image_size;
  im.height = cfg.image_size;
  const double size = cfg.image_size;
  const bool paired = cfg.crowding > 0.0;
  int count = static_cast<int>(rng.uniform_int(cfg.min_instances, cfg.max_instances));
  if (paired) count = (count + 1) / 2;  // number of pairs
  constexpr int kAttempts = 50;
  for (int n = 0; n < count; ++n) {
    const int category = static_cast<int>(rng.uniform_int(0, cfg.num_classes - 1));
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const double side = std::exp(rng.uniform(std::log(cfg.min_size), std::log(cfg.max_size)));
      const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
      const double w = quantize(std::min(side * std::sqrt(aspect), size * 0.9));
      const double h = quantize(std::min(side / std::sqrt(aspect), size * 0.9));
      const double shift = paired ? quantize(w * (1.0 - cfg.crowding) / (1.0 + cfg.crowding)) : 0.0;
      if (w + shift > size || h > size) continue;
      const double x1 = quantize(rng.uniform(0.0, size - w - shift));
      const double y1 = quantize(rng.uniform(0.0, size - h));
      const Box a{x1, y1, x1 + w, y1 + h};
      const Box hull{x1, y1, x1 + w + shift, y1 + h};
      if (a.degenerate() || overlaps_any(hull, im.gts)) continue;
      im.gts.push_back({category, a, next_gt_id++});
      if (paired) im.gts.push_back({category, {x1 + shift, y1, x1 + shift + w, y1 + h}, next_gt_id++});
      break;
    }
  }
  return im;
}

struct Occupancy {
  std::set<std::tuple<int, int, int>> cells;
  bool take(int level, Cell c) { return cells.insert({level, c.row, c.col}).second; }
  bool free(int level, Cell c) const { return !cells.contains({level, c.row, c.col}); }
};

// Cells of `level` at Chebyshev distance in [lo, hi] from `center`, scan order.
std::vector<Cell> ring(const PyramidLayout& layout, int level, Cell center, int lo, int hi) {
  std::vector<Cell> out;
  for (int dr = -hi; dr <= hi; ++dr) {
    for (int dc = -hi; dc <= hi; ++dc) {
      const int d = std::max(std::abs(dr), std::abs(dc));
      const Cell c{center.row + dr, center.col + dc};
      if (d >= lo && d <= hi && layout.valid(level, c)) out.push_back(c);
    }
  }
  return out;
}

Box jittered(const Box& b, double frac, Rng& rng) {
  if (frac <= 0.0) return b;
  const double jx = frac * b.width();
  const double jy = frac * b.height();
  Box out{b.x1 + rng.uniform(-jx, jx), b.y1 + rng.uniform(-jy, jy), b.x2 + rng.uniform(-jx, jx),
          b.y2 + rng.uniform(-jy, jy)};
  return out.degenerate() ? b : out;
}

}  // namespace

std::vector<ImageRecord> gen_scenes(const SceneConfig& cfg, int n) {
  cfg.validate();
  if (n < 0) throw ValidationError("scene count must be non-negative");
  std::vector<ImageRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  int next_gt_id = 1;
  for (int i = 0; i < n; ++i) out.push_back(gen_scene(cfg, i + 1, next_gt_id));
  return out;
}

Dataset make_dataset(std::vector<ImageRecord> images, int num_classes) {
  Dataset ds;
  ds.images = std::move(images);
  for (int c = 0; c < num_classes; ++c) ds.categories.push_back({c + 1, "class" + std::to_string(c)});
  return ds;
}

double mean_max_iou(std::span<const ImageRecord> images) {
  double sum = 0.0;
  long count = 0;
  for (const ImageRecord& im : images) {
    if (im.gts.size() < 2) continue;
    for (std::size_t i = 0; i < im.gts.size(); ++i) {
      double best = 0.0;
      for (std::size_t j = 0; j < im.gts.size(); ++j) {
        if (i != j) best = std::max(best, iou(im.gts[i].box, im.gts[j].box));
      }
      sum += best;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

OracleOutput oracle_predict(const ImageRecord& image, const PyramidLayout& layout,
                            const OracleConfig& cfg, int num_classes) {
  cfg.validate();
  if (num_classes < 1) throw ValidationError("num_classes must be positive");
  Rng rng(cfg.seed, static_cast<std::uint64_t>(image.id));
  const int levels = layout.num_levels();

  OracleOutput out;
  out.scores.strides = layout.strides();
  for (int l = 0; l < levels; ++l) {
    out.scores.levels.emplace_back(num_classes, layout.level_height(l), layout.level_width(l));
  }

  std::vector<LevelCell> peaks;
  for (const GroundTruth& g : image.gts) {
    if (g.category < 0 || g.category >= num_classes) {
      throw ValidationError("gt category outside [0, num_classes)");
    }
    const LevelCell peak = layout.project(g.box);
    const double s0 = rng.uniform(cfg.min_score, cfg.max_score);
    const Point at = layout.cell_center(peak.level, peak.cell);
    const double peak_stride = layout.stride(peak.level);
    for (int l = 0; l < levels; ++l) {
      Grid& grid = out.scores.levels[static_cast<std::size_t>(l)];
      const int dl = std::abs(l - peak.level);
      for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
          const Point p = layout.cell_center(l, {r, c});
          const double d = std::max(std::abs(p.x - at.x), std::abs(p.y - at.y)) / peak_stride;
          double& v = grid.at(g.category, r, c);
          v = std::max(v, s0 * std::pow(cfg.decay, d + dl));
        }
      }
    }
    peaks.push_back(peak);
  }

  auto emit = [&](int gt, int rank, int level, Cell cell, const Box& box) {
    Prediction p;
    p.scores.resize(static_cast<std::size_t>(num_classes));
    const Grid& grid = out.scores.levels[static_cast<std::size_t>(level)];
    for (int c = 0; c < num_classes; ++c) {
      p.scores[static_cast<std::size_t>(c)] = grid.at(c, cell.row, cell.col);
    }
    p.box = box;
    p.level = level;
    p.cell = cell;
    Detection d;
    d.image_id = image.id;
    d.category = image.gts[static_cast<std::size_t>(gt)].category;
    d.score = p.scores[static_cast<std::size_t>(d.category)];
    d.box = box;
    d.level = level;
    d.cell = cell;
    out.preds.push_back(std::move(p));
    out.dets.push_back(std::move(d));
    out.source_gt.push_back(gt);
    out.rank.push_back(rank);
  };

  Occupancy occupied;
  for (std::size_t i = 0; i < image.gts.size(); ++i) {
    const Box& gt_box = image.gts[i].box;
    const LevelCell peak = peaks[i];
    const int gi = static_cast<int>(i);

    // Peak prediction: the centre cell, or the closest free cell if another gt got there first.
    bool placed = false;
    for (int radius = 0; radius <= 2 && !placed; ++radius) {
      for (const Cell& c : ring(layout, peak.level, peak.cell, radius, radius)) {
        if (occupied.take(peak.level, c)) {
          emit(gi, 0, peak.level, c, jittered(gt_box, cfg.loc_noise, rng));
          placed = true;
          break;
        }
      }
    }

    for (int k = 1; k < cfg.duplicates; ++k) {
      const bool cross = levels > 1 && rng.bernoulli(cfg.cross_level_prob);
      int level = peak.level;
      std::vector<Cell> candidates;
      if (cross) {
        if (peak.level == 0) {
          level = 1;
        } else if (peak.level == levels - 1) {
          level = levels - 2;
        } else {
          level = rng.bernoulli(0.5) ? peak.level - 1 : peak.level + 1;
        }
        const Cell centre = layout.nearest_cell(level, layout.cell_center(peak.level, peak.cell));
        candidates = ring(layout, level, centre, 0, 1);
      } else {
        const int radius = rng.bernoulli(cfg.far_prob) ? 2 : 1;
        candidates = ring(layout, level, peak.cell, radius, radius);
      }
      std::erase_if(candidates, [&](const Cell& c) { return !occupied.free(level, c); });
      if (candidates.empty()) continue;
      const Cell cell = candidates[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
      occupied.take(level, cell);
      emit(gi, k, level, cell, jittered(gt_box, cfg.jitter, rng));
    }
  }
  return out;
}

}  // namespace e2edet
