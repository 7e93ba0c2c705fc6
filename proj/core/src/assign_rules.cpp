#include "e2edet/assign_rules.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "e2edet/error.hpp"

namespace e2edet {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

constexpr std::array<AssignRule, 9> kRules = {
    AssignRule::kPoto,        AssignRule::kAnchor,      AssignRule::kCenter,
    AssignRule::kFcos,        AssignRule::kAtss,        AssignRule::kQualityAtss,
    AssignRule::kQualityFcos, AssignRule::kQualityTopk, AssignRule::kLossCost,
};

// Gives each claimed prediction to the smallest-area claimant (ties: lower gt index).
TargetSet resolve_by_area(std::span<const GroundTruth> gts,
                          const std::vector<std::vector<int>>& claims, std::size_t num_preds) {
  TargetSet t(num_preds);
  for (std::size_t i = 0; i < claims.size(); ++i) {
    for (int j : claims[i]) {
      int& owner = t.gt_of_pred[sz(j)];
      if (owner < 0 || gts[i].box.area() < gts[sz(owner)].box.area()) {
        owner = static_cast<int>(i);
      }
    }
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (t.foreground_of(static_cast<int>(i)).empty()) t.unmatched_gts.push_back(static_cast<int>(i));
  }
  return t;
}

TargetSet from_assignment(Assignment a, std::size_t num_preds, std::size_t num_gts) {
  TargetSet t(num_preds);
  std::vector<char> matched(num_gts, 0);
  std::vector<std::pair<int, int>> real;
  for (const auto& [g, p] : a.pairs) {
    if (sz(p) < num_preds) {
      t.gt_of_pred[sz(p)] = g;
      matched[sz(g)] = 1;
      real.emplace_back(g, p);
    }
  }
  a.pairs = std::move(real);
  a.unmatched.clear();
  for (std::size_t i = 0; i < num_gts; ++i) {
    if (!matched[i]) {
      a.unmatched.push_back(static_cast<int>(i));
      t.unmatched_gts.push_back(static_cast<int>(i));
    }
  }
  t.assignment = std::move(a);
  return t;
}

bool strictly_inside(Point p, const Box& b) noexcept {
  return p.x > b.x1 && p.x < b.x2 && p.y > b.y1 && p.y < b.y2;
}

double center_distance(const PyramidLayout& layout, const Prediction& pred, const Box& gt) {
  const Point a = layout.cell_center(pred.level, pred.cell);
  const Point b = center_of(gt);
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Indices of predictions on `level`, ascending.
std::vector<std::vector<int>> preds_by_level(std::span<const Prediction> preds,
                                             const PyramidLayout& layout) {
  std::vector<std::vector<int>> by_level(sz(layout.num_levels()));
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const int l = preds[j].level;
    if (l < 0 || l >= layout.num_levels()) {
      throw ValidationError("prediction " + std::to_string(j) + " has level " +
                            std::to_string(l) + " outside the pyramid");
    }
    by_level[sz(l)].push_back(static_cast<int>(j));
  }
  return by_level;
}

// First k of `idx` ordered by key descending (or ascending), ties to the lower index.
std::vector<int> top_k(std::vector<int> idx, const std::vector<double>& key, int k,
                       bool descending) {
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return descending ? key[sz(a)] > key[sz(b)] : key[sz(a)] < key[sz(b)];
  });
  if (static_cast<int>(idx.size()) > k) idx.resize(sz(k));
  return idx;
}

}  // namespace

std::size_t TargetSet::foreground_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(gt_of_pred.begin(), gt_of_pred.end(), [](int g) { return g >= 0; }));
}

std::vector<int> TargetSet::foreground_of(int gt) const {
  std::vector<int> out;
  for (std::size_t j = 0; j < gt_of_pred.size(); ++j) {
    if (gt_of_pred[j] == gt) out.push_back(static_cast<int>(j));
  }
  return out;
}

std::vector<int> TargetSet::foreground() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < gt_of_pred.size(); ++j) {
    if (gt_of_pred[j] >= 0) out.push_back(static_cast<int>(j));
  }
  return out;
}

AssignRule parse_rule(std::string_view name) {
  for (AssignRule r : kRules) {
    if (to_string(r) == name) return r;
  }
  throw ValidationError("unknown assignment rule '" + std::string(name) +
                        "' (expected poto, anchor, center, fcos, atss, quality_atss, "
                        "quality_fcos, quality_topk or loss_cost)");
}

std::string_view to_string(AssignRule rule) noexcept {
  switch (rule) {
    case AssignRule::kPoto: return "poto";
    case AssignRule::kAnchor: return "anchor";
    case AssignRule::kCenter: return "center";
    case AssignRule::kFcos: return "fcos";
    case AssignRule::kAtss: return "atss";
    case AssignRule::kQualityAtss: return "quality_atss";
    case AssignRule::kQualityFcos: return "quality_fcos";
    case AssignRule::kQualityTopk: return "quality_topk";
    case AssignRule::kLossCost: return "loss_cost";
  }
  return "?";
}

std::span<const AssignRule> all_rules() noexcept { return kRules; }

bool is_one_to_one(AssignRule rule) noexcept {
  return rule == AssignRule::kPoto || rule == AssignRule::kAnchor ||
         rule == AssignRule::kCenter || rule == AssignRule::kLossCost;
}

double statistical_threshold(std::span<const double> values) {
  if (values.empty()) throw ValidationError("statistical_threshold: no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return *lo;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return mean + std::sqrt(var / n);
}

TargetSet poto_assign(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                      const QualityParams& params, const PyramidLayout& layout) {
  if (gts.empty()) return TargetSet(preds.size());
  QualityMatrix q = quality_matrix(gts, preds, params, layout);
  if (q.g > q.n) {
    // Zero-quality padding columns; a gt landing on one ends up unmatched.
    QualityMatrix padded(q.g, q.g);
    for (int i = 0; i < q.g; ++i) {
      for (int j = 0; j < q.n; ++j) padded(i, j) = q(i, j);
    }
    q = std::move(padded);
  }
  return from_assignment(hungarian_max(q), preds.size(), gts.size());
}

TargetSet anchor_rule(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                      const PyramidLayout& layout) {
  const std::size_t G = gts.size();
  const std::size_t N = preds.size();
  std::vector<double> overlap(G * N, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    const Box anchor =
        preds[j].anchor ? *preds[j].anchor : layout.default_anchor(preds[j].level, preds[j].cell);
    for (std::size_t i = 0; i < G; ++i) overlap[i * N + j] = iou(anchor, gts[i].box);
  }
  // Preference lists: anchors by IoU descending, ties to the lower index, IoU > 0 only.
  std::vector<std::vector<int>> prefs(G);
  for (std::size_t i = 0; i < G; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      if (overlap[i * N + j] > 0.0) prefs[i].push_back(static_cast<int>(j));
    }
    std::stable_sort(prefs[i].begin(), prefs[i].end(), [&](int a, int b) {
      return overlap[i * N + sz(a)] > overlap[i * N + sz(b)];
    });
  }
  // Deferred acceptance: contested anchors keep the higher-IoU gt (ties: lower gt index).
  std::vector<int> holder(N, -1);
  std::vector<std::size_t> next(G, 0);
  std::vector<int> free_gts(G);
  std::iota(free_gts.rbegin(), free_gts.rend(), 0);
  while (!free_gts.empty()) {
    const int g = free_gts.back();
    free_gts.pop_back();
    auto& cursor = next[sz(g)];
    if (cursor >= prefs[sz(g)].size()) continue;
    const int j = prefs[sz(g)][cursor++];
    const int h = holder[sz(j)];
    if (h < 0) {
      holder[sz(j)] = g;
    } else {
      const double vg = overlap[sz(g) * N + sz(j)];
      const double vh = overlap[sz(h) * N + sz(j)];
      if (vg > vh || (vg == vh && g < h)) {
        holder[sz(j)] = g;
        free_gts.push_back(h);
      } else {
        free_gts.push_back(g);
      }
    }
  }
  Assignment a;
  std::vector<int> pred_of(G, -1);
  for (std::size_t j = 0; j < N; ++j) {
    if (holder[j] >= 0) pred_of[sz(holder[j])] = static_cast<int>(j);
  }
  for (std::size_t i = 0; i < G; ++i) {
    if (pred_of[i] >= 0) {
      a.pairs.emplace_back(static_cast<int>(i), pred_of[i]);
      a.objective += overlap[i * N + sz(pred_of[i])];
    }
  }
  return from_assignment(std::move(a), N, G);
}

TargetSet center_rule(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                      const PyramidLayout& layout) {
  Assignment a;
  std::vector<char> taken(preds.size(), 0);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const LevelCell target = layout.project(gts[i].box);
    for (std::size_t j = 0; j < preds.size(); ++j) {
      if (preds[j].level != target.level || preds[j].cell != target.cell) continue;
      if (!taken[j]) {
        taken[j] = 1;
        a.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
      break;
    }
  }
  return from_assignment(std::move(a), preds.size(), gts.size());
}

TargetSet fcos_o2m(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                   const PyramidLayout& layout, double radius) {
  std::vector<std::vector<int>> claims(gts.size());
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const Prediction& p = preds[j];
    const Point loc = layout.cell_center(p.level, p.cell);
    const double stride = layout.stride(p.level);
    const LevelRange& range = layout.ranges()[sz(p.level)];
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const Box& b = gts[i].box;
      if (!strictly_inside(loc, b) || !in_center_region(loc, b, radius, stride)) continue;
      const double max_reg = std::max({loc.x - b.x1, loc.y - b.y1, b.x2 - loc.x, b.y2 - loc.y});
      if (!range.contains(max_reg)) continue;
      claims[i].push_back(static_cast<int>(j));
    }
  }
  return resolve_by_area(gts, claims, preds.size());
}

TargetSet atss_o2m(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                   const PyramidLayout& layout, int k) {
  if (k <= 0) throw ValidationError("atss: k must be positive");
  const auto by_level = preds_by_level(preds, layout);
  std::vector<std::vector<int>> claims(gts.size());
  std::vector<double> dist(preds.size());
  std::vector<double> overlap(preds.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const Box& b = gts[i].box;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      dist[j] = center_distance(layout, preds[j], b);
      const Box anchor = preds[j].anchor ? *preds[j].anchor
                                         : layout.default_anchor(preds[j].level, preds[j].cell);
      overlap[j] = iou(anchor, b);
    }
    std::vector<int> candidates;
    for (const auto& level : by_level) {
      for (int j : top_k(level, dist, k, false)) candidates.push_back(j);
    }
    if (candidates.empty()) continue;
    std::vector<double> values;
    for (int j : candidates) values.push_back(overlap[sz(j)]);
    const double thr = statistical_threshold(values);
    std::sort(candidates.begin(), candidates.end());
    for (int j : candidates) {
      const Prediction& p = preds[sz(j)];
      if (overlap[sz(j)] >= thr && overlap[sz(j)] > 0.0 &&
          strictly_inside(layout.cell_center(p.level, p.cell), b)) {
        claims[i].push_back(j);
      }
    }
  }
  return resolve_by_area(gts, claims, preds.size());
}

TargetSet quality_atss(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                       const QualityParams& params, const PyramidLayout& layout, int k) {
  if (k <= 0) throw ValidationError("quality_atss: k must be positive");
  const auto by_level = preds_by_level(preds, layout);
  const QualityMatrix q = quality_matrix(gts, preds, params, layout);
  std::vector<std::vector<int>> claims(gts.size());
  std::vector<double> row(preds.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (std::size_t j = 0; j < preds.size(); ++j) row[j] = q(static_cast<int>(i), static_cast<int>(j));
    // Candidates: the top-k admissible (non-zero quality) predictions of every level,
    // pooled across levels before thresholding.
    std::vector<int> candidates;
    for (const auto& level : by_level) {
      std::vector<int> admissible;
      for (int j : level) {
        if (row[sz(j)] > 0.0) admissible.push_back(j);
      }
      for (int j : top_k(admissible, row, k, true)) candidates.push_back(j);
    }
    if (candidates.empty()) continue;
    std::vector<double> values;
    for (int j : candidates) values.push_back(row[sz(j)]);
    const double thr = statistical_threshold(values);
    std::sort(candidates.begin(), candidates.end());
    for (int j : candidates) {
      if (row[sz(j)] >= thr) claims[i].push_back(j);
    }
  }
  return resolve_by_area(gts, claims, preds.size());
}

TargetSet quality_fcos(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                       const QualityParams& params, const PyramidLayout& layout, double radius) {
  const auto by_level = preds_by_level(preds, layout);
  const QualityMatrix q = quality_matrix(gts, preds, params, layout);
  std::vector<std::vector<int>> claims(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    int best_level = -1;
    double best = 0.0;
    for (std::size_t l = 0; l < by_level.size(); ++l) {
      for (int j : by_level[l]) {
        const double v = q(static_cast<int>(i), j);
        if (v > best) {
          best = v;
          best_level = static_cast<int>(l);
        }
      }
    }
    if (best_level < 0) continue;
    const Box& b = gts[i].box;
    const double stride = layout.stride(best_level);
    for (int j : by_level[sz(best_level)]) {
      const Point loc = layout.cell_center(best_level, preds[sz(j)].cell);
      if (strictly_inside(loc, b) && in_center_region(loc, b, radius, stride)) {
        claims[i].push_back(j);
      }
    }
  }
  return resolve_by_area(gts, claims, preds.size());
}

TargetSet quality_topk(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                       const QualityParams& params, const PyramidLayout& layout, int k) {
  if (k <= 0) throw ValidationError("quality_topk: k must be positive");
  const QualityMatrix q = quality_matrix(gts, preds, params, layout);
  std::vector<std::vector<int>> claims(gts.size());
  std::vector<double> row(preds.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    std::vector<int> admissible;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      row[j] = q(static_cast<int>(i), static_cast<int>(j));
      if (row[j] > 0.0) admissible.push_back(static_cast<int>(j));
    }
    claims[i] = top_k(admissible, row, k, true);
    std::sort(claims[i].begin(), claims[i].end());
  }
  return resolve_by_area(gts, claims, preds.size());
}

TargetSet loss_cost_assign(std::span<const GroundTruth> gts, std::span<const Prediction> preds,
                           const LossParams& params) {
  if (gts.empty()) return TargetSet(preds.size());
  if (gts.size() <= preds.size()) {
    return from_assignment(loss_cost_match(gts, preds, params), preds.size(), gts.size());
  }
  // More gts than predictions: pad with columns costlier than any real pair.
  const int rows = static_cast<int>(gts.size());
  const int cols = rows;
  std::vector<double> cost(sz(rows) * sz(cols), 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (std::size_t j = 0; j < preds.size(); ++j) {
      const double c = foreground_loss(gts[i], preds[j], params);
      cost[i * sz(cols) + j] = c;
      worst = std::max(worst, c);
    }
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (std::size_t j = preds.size(); j < sz(cols); ++j) cost[i * sz(cols) + j] = worst + 1.0;
  }
  const std::vector<int> sol = solve_assignment(cost, rows, cols, false);
  Assignment a;
  for (int i = 0; i < rows; ++i) {
    const int j = sol[sz(i)];
    if (sz(j) < preds.size()) {
      a.pairs.emplace_back(i, j);
      a.objective += cost[sz(i) * sz(cols) + sz(j)];
    }
  }
  return from_assignment(std::move(a), preds.size(), gts.size());
}

TargetSet assign(AssignRule rule, std::span<const GroundTruth> gts,
                 std::span<const Prediction> preds, const PyramidLayout& layout,
                 const RuleParams& params) {
  switch (rule) {
    case AssignRule::kPoto: return poto_assign(gts, preds, params.quality, layout);
    case AssignRule::kAnchor: return anchor_rule(gts, preds, layout);
    case AssignRule::kCenter: return center_rule(gts, preds, layout);
    case AssignRule::kFcos: return fcos_o2m(gts, preds, layout, params.radius);
    case AssignRule::kAtss: return atss_o2m(gts, preds, layout, params.atss_k);
    case AssignRule::kQualityAtss:
      return quality_atss(gts, preds, params.quality, layout, params.atss_k);
    case AssignRule::kQualityFcos:
      return quality_fcos(gts, preds, params.quality, layout, params.radius);
    case AssignRule::kQualityTopk:
      return quality_topk(gts, preds, params.quality, layout, params.topk_k);
    case AssignRule::kLossCost: return loss_cost_assign(gts, preds, params.loss);
  }
  throw ValidationError("unhandled assignment rule");
}

}  // namespace e2edet
