#include "e2edet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "e2edet/error.hpp"

namespace e2edet {

Interpolation parse_interpolation(const std::string& name) {
  if (name == "101" || name == "coco") return Interpolation::kCoco101;
  if (name == "all" || name == "all-point") return Interpolation::kAllPoint;
  throw ValidationError("unknown interpolation '" + name + "' (expected 101 or all)");
}

std::string to_string(Interpolation interp) {
  return interp == Interpolation::kCoco101 ? "101" : "all";
}

std::vector<double> coco_iou_thresholds() {
  const double step = (0.95 - 0.5) / 9.0;
  std::vector<double> t(10);
  for (int k = 0; k < 10; ++k) t[static_cast<std::size_t>(k)] = 0.5 + k * step;
  return t;
}

namespace {

std::vector<int> score_order(std::span<const Detection> dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dets[static_cast<std::size_t>(a)].score > dets[static_cast<std::size_t>(b)].score;
  });
  return order;
}

// Greedy matching over a precomputed IoU table; `ranked` are detection rows in
// processing order. Returns the gt claimed by each ranked row, or -1.
std::vector<int> greedy_claims(const std::vector<double>& ious, int num_gt,
                               std::span<const int> ranked, double thr,
                               std::span<const char> compatible) {
  std::vector<char> taken(static_cast<std::size_t>(num_gt), 0);
  std::vector<int> claims;
  claims.reserve(ranked.size());
  for (int d : ranked) {
    int best = -1;
    double best_iou = thr;
    for (int g = 0; g < num_gt; ++g) {
      const std::size_t k = static_cast<std::size_t>(d) * static_cast<std::size_t>(num_gt) +
                            static_cast<std::size_t>(g);
      if (taken[static_cast<std::size_t>(g)] != 0 || compatible[k] == 0) continue;
      if (ious[k] >= best_iou && (best < 0 || ious[k] > best_iou)) {
        best = g;
        best_iou = ious[k];
      }
    }
    if (best >= 0) taken[static_cast<std::size_t>(best)] = 1;
    claims.push_back(best);
  }
  return claims;
}

// Per (image, class) slice: the top max_dets detections by score and the gts.
struct Slice {
  std::vector<Detection> dets;  // descending score
  std::vector<GroundTruth> gts;
  std::vector<double> ious;     // dets x gts
  std::vector<char> all_ok;
};

// Slices grouped by class; classes without gts are kept so their detections
// are not silently dropped from bookkeeping, but they never contribute to AP.
std::map<int, std::vector<Slice>> build_slices(std::span<const Detection> dets,
                                               std::span<const ImageRecord> images,
                                               int max_dets) {
  std::map<int, std::size_t> image_index;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!image_index.emplace(images[i].id, i).second) {
      throw ValidationError("duplicate image id " + std::to_string(images[i].id));
    }
  }
  std::vector<std::map<int, std::vector<Detection>>> by_image(images.size());
  for (const Detection& d : dets) {
    auto it = image_index.find(d.image_id);
    if (it == image_index.end()) {
      throw ValidationError("detection refers to unknown image_id " + std::to_string(d.image_id));
    }
    by_image[it->second][d.category].push_back(d);
  }
  std::map<int, std::vector<Slice>> slices;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::map<int, std::vector<GroundTruth>> gts;
    for (const GroundTruth& g : images[i].gts) gts[g.category].push_back(g);
    std::vector<int> classes;
    for (const auto& [c, v] : gts) classes.push_back(c);
    for (const auto& [c, v] : by_image[i]) {
      if (!gts.contains(c)) classes.push_back(c);
    }
    for (int c : classes) {
      Slice s;
      if (auto it = gts.find(c); it != gts.end()) s.gts = it->second;
      if (auto it = by_image[i].find(c); it != by_image[i].end()) {
        const std::vector<int> order = score_order(it->second);
        for (int k : order) {
          if (static_cast<int>(s.dets.size()) >= max_dets) break;
          s.dets.push_back(it->second[static_cast<std::size_t>(k)]);
        }
      }
      s.ious.resize(s.dets.size() * s.gts.size());
      for (std::size_t d = 0; d < s.dets.size(); ++d) {
        for (std::size_t g = 0; g < s.gts.size(); ++g) {
          s.ious[d * s.gts.size() + g] = iou(s.dets[d].box, s.gts[g].box);
        }
      }
      s.all_ok.assign(s.ious.size(), 1);
      slices[c].push_back(std::move(s));
    }
  }
  return slices;
}

struct ClassCurve {
  int num_gt = 0;
  double ap = 0.0;
  double recall = 0.0;
};

ClassCurve class_curve(const std::vector<Slice>& slices, double thr, Interpolation interp) {
  struct Ranked {
    double score;
    char tp;
  };
  std::vector<Ranked> ranked;
  int num_gt = 0;
  for (const Slice& s : slices) {
    num_gt += static_cast<int>(s.gts.size());
    std::vector<int> rows(s.dets.size());
    std::iota(rows.begin(), rows.end(), 0);
    const std::vector<int> claims = greedy_claims(s.ious, static_cast<int>(s.gts.size()), rows,
                                                  thr, s.all_ok);
    for (std::size_t d = 0; d < s.dets.size(); ++d) {
      ranked.push_back({s.dets[d].score, static_cast<char>(claims[d] >= 0)});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  std::vector<char> tp;
  tp.reserve(ranked.size());
  int hits = 0;
  for (const Ranked& r : ranked) {
    tp.push_back(r.tp);
    hits += r.tp;
  }
  ClassCurve out;
  out.num_gt = num_gt;
  if (num_gt > 0) {
    out.ap = ap_from_ranking(tp, num_gt, interp);
    out.recall = static_cast<double>(hits) / num_gt;
  }
  return out;
}

}  // namespace

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                             double iou_thr) {
  const int g = static_cast<int>(gts.size());
  std::vector<double> ious(dets.size() * gts.size());
  std::vector<char> ok(ious.size());
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t k = 0; k < gts.size(); ++k) {
      ious[d * gts.size() + k] = iou(dets[d].box, gts[k].box);
      ok[d * gts.size() + k] = static_cast<char>(dets[d].category == gts[k].category);
    }
  }
  const std::vector<int> order = score_order(dets);
  const std::vector<int> claims = greedy_claims(ious, g, order, iou_thr, ok);
  MatchResult r;
  r.true_positive.assign(dets.size(), 0);
  r.matched_gt.assign(dets.size(), -1);
  int matched = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto d = static_cast<std::size_t>(order[k]);
    r.matched_gt[d] = claims[k];
    if (claims[k] >= 0) {
      r.true_positive[d] = 1;
      ++matched;
    }
  }
  r.false_negatives = g - matched;
  return r;
}

double ap_from_ranking(std::span<const char> true_positive, int num_gt, Interpolation interp) {
  if (num_gt <= 0) throw ValidationError("average precision needs at least one gt");
  const std::size_t n = true_positive.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (true_positive[i] != 0) {
      tp += 1.0;
    } else {
      fp += 1.0;
    }
    recall[i] = tp / num_gt;
    precision[i] = tp / (tp + fp);
  }
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  if (interp == Interpolation::kAllPoint) {
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
    return ap;
  }
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k * 0.01;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it == recall.end()) break;
    sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

double average_precision(std::span<const Detection> dets, std::span<const ImageRecord> images,
                         double iou_thr, const EvalOptions& opts) {
  const auto slices = build_slices(dets, images, opts.max_dets);
  double sum = 0.0;
  int count = 0;
  for (const auto& [c, s] : slices) {
    const ClassCurve cc = class_curve(s, iou_thr, opts.interp);
    if (cc.num_gt == 0) continue;
    sum += cc.ap;
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

double average_recall(std::span<const Detection> dets, std::span<const ImageRecord> images,
                      std::span<const double> iou_thrs, int max_dets) {
  const auto slices = build_slices(dets, images, max_dets);
  double sum = 0.0;
  int count = 0;
  for (const auto& [c, s] : slices) {
    for (double t : iou_thrs) {
      const ClassCurve cc = class_curve(s, t, Interpolation::kCoco101);
      if (cc.num_gt == 0) break;
      sum += cc.recall;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / count;
}

int duplicate_count(std::span<const Detection> dets, std::span<const ImageRecord> images,
                    double iou_thr) {
  const auto slices = build_slices(dets, images, std::numeric_limits<int>::max());
  int count = 0;
  for (const auto& [c, per_image] : slices) {
    for (const Slice& s : per_image) {
      const int g = static_cast<int>(s.gts.size());
      std::vector<int> rows(s.dets.size());
      std::iota(rows.begin(), rows.end(), 0);
      const std::vector<int> claims = greedy_claims(s.ious, g, rows, iou_thr, s.all_ok);
      std::vector<char> matched(static_cast<std::size_t>(g), 0);
      for (std::size_t d = 0; d < s.dets.size(); ++d) {
        if (claims[d] >= 0) {
          matched[static_cast<std::size_t>(claims[d])] = 1;
          continue;
        }
        for (int k = 0; k < g; ++k) {
          if (matched[static_cast<std::size_t>(k)] != 0 &&
              s.ious[d * static_cast<std::size_t>(g) + static_cast<std::size_t>(k)] > iou_thr) {
            ++count;
            break;
          }
        }
      }
    }
  }
  return count;
}

EvalResult evaluate(std::span<const Detection> dets, std::span<const ImageRecord> images,
                    const EvalOptions& opts) {
  if (opts.max_dets <= 0) throw ValidationError("max_dets must be positive");
  const auto slices = build_slices(dets, images, opts.max_dets);
  const std::vector<double> thrs = coco_iou_thresholds();
  EvalResult r;
  for (const auto& [c, s] : slices) {
    ClassResult cr;
    cr.category = c;
    for (std::size_t k = 0; k < thrs.size(); ++k) {
      const ClassCurve cc = class_curve(s, thrs[k], opts.interp);
      cr.num_gt = cc.num_gt;
      if (cc.num_gt == 0) break;
      cr.ap += cc.ap;
      cr.ar += cc.recall;
      if (k == 0) cr.ap50 = cc.ap;
      if (k == 5) cr.ap75 = cc.ap;
    }
    if (cr.num_gt == 0) continue;
    cr.ap /= static_cast<double>(thrs.size());
    cr.ar /= static_cast<double>(thrs.size());
    r.per_class.push_back(cr);
  }
  if (!r.per_class.empty()) {
    const double n = static_cast<double>(r.per_class.size());
    for (const ClassResult& cr : r.per_class) {
      r.mAP += cr.ap;
      r.AP50 += cr.ap50;
      r.AP75 += cr.ap75;
      r.AR += cr.ar;
    }
    r.mAP /= n;
    r.AP50 /= n;
    r.AP75 /= n;
    r.AR /= n;
  }
  r.duplicate_count = duplicate_count(dets, images, opts.duplicate_iou);
  return r;
}

std::string eval_csv(const EvalResult& r) {
  std::string out = "scope,category,num_gt,mAP,AP50,AP75,AR,duplicates\n";
  char buf[256];
  int total_gt = 0;
  for (const ClassResult& c : r.per_class) total_gt += c.num_gt;
  std::snprintf(buf, sizeof buf, "all,-1,%d,%.6f,%.6f,%.6f,%.6f,%d\n", total_gt, r.mAP, r.AP50,
                r.AP75, r.AR, r.duplicate_count);
  out += buf;
  for (const ClassResult& c : r.per_class) {
    std::snprintf(buf, sizeof buf, "class,%d,%d,%.6f,%.6f,%.6f,%.6f,\n", c.category, c.num_gt,
                  c.ap, c.ap50, c.ap75, c.ar);
    out += buf;
  }
  return out;
}

std::string eval_table(const EvalResult& r, const Dataset* names) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %8s %8s %8s %8s %6s\n", "category", "mAP", "AP50", "AP75",
                "AR", "gts");
  out += buf;
  for (const ClassResult& c : r.per_class) {
    std::string name = std::to_string(c.category);
    if (names != nullptr && c.category < names->num_classes()) {
      const Category& cat = names->categories[static_cast<std::size_t>(c.category)];
      name = cat.name.empty() ? std::to_string(cat.id) : cat.name;
    }
    std::snprintf(buf, sizeof buf, "%-20.20s %8.4f %8.4f %8.4f %8.4f %6d\n", name.c_str(), c.ap,
                  c.ap50, c.ap75, c.ar, c.num_gt);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-20s %8.4f %8.4f %8.4f %8.4f\nduplicates: %d\n", "all", r.mAP,
                r.AP50, r.AP75, r.AR, r.duplicate_count);
  out += buf;
  return out;
}

}  // namespace e2edet
