#include "e2edet/study.hpp"

#include <cstdio>

#include "e2edet/parallel.hpp"

namespace e2edet {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<Detection> concat(std::vector<std::vector<Detection>>&& parts) {
  std::vector<Detection> out;
  for (auto& p : parts) {
    out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  return out;
}

}  // namespace

std::vector<NmsRow> nms_study(std::span<const Detection> dets, std::span<const ImageRecord> images,
                              std::span<const NmsConfig> configs, std::span<const double> strides,
                              const EvalOptions& eval) {
  std::vector<NmsRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::vector<Detection> kept = apply_nms(dets, configs[i], strides);
    rows.push_back({static_cast<int>(i), configs[i], evaluate(kept, images, eval)});
  }
  return rows;
}

std::string nms_study_csv(std::span<const NmsRow> rows) {
  std::string out = "config_id,across_scales,spatial_range,AP,AP50,AP75,AR\n";
  for (const NmsRow& r : rows) {
    out += std::to_string(r.config_id) + "," + (r.config.across_scales ? "true" : "false") + "," +
           r.config.range_label() + "," + fmt6(r.result.mAP) + "," + fmt6(r.result.AP50) + "," +
           fmt6(r.result.AP75) + "," + fmt6(r.result.AR) + "\n";
  }
  return out;
}

std::vector<Detection> StudyData::all_dets() const {
  std::vector<Detection> out;
  for (const OracleOutput& o : outputs) out.insert(out.end(), o.dets.begin(), o.dets.end());
  return out;
}

StudyData simulate(const StudyConfig& cfg) {
  StudyData data;
  data.layout = PyramidLayout::fcos_default(cfg.scene.image_size, cfg.scene.image_size);
  data.images = gen_scenes(cfg.scene, cfg.images);
  data.outputs.resize(data.images.size());
  parallel_for(
      data.images.size(),
      [&](std::size_t i) {
        data.outputs[i] =
            oracle_predict(data.images[i], data.layout, cfg.oracle, cfg.scene.num_classes);
      },
      cfg.threads);
  return data;
}

std::vector<Detection> hard_3dmf_keep(const StudyData& data, FilterParams filter, int threads) {
  std::vector<std::vector<Detection>> parts(data.outputs.size());
  parallel_for(
      data.outputs.size(),
      [&](std::size_t i) {
        const OracleOutput& o = data.outputs[i];
        const FeaturePyramid filtered = hard_3dmf(o.scores, filter);
        for (const Detection& d : o.dets) {
          const double v =
              filtered.levels[static_cast<std::size_t>(d.level)].at(d.category, d.cell.row,
                                                                     d.cell.col);
          if (v > 0.0) parts[i].push_back(d);
        }
      },
      threads);
  return concat(std::move(parts));
}

std::vector<Detection> rule_keep_set(const StudyData& data, AssignRule rule,
                                     const RuleParams& params, int threads) {
  if (!is_one_to_one(rule)) return data.all_dets();
  std::vector<std::vector<Detection>> parts(data.outputs.size());
  parallel_for(
      data.outputs.size(),
      [&](std::size_t i) {
        const OracleOutput& o = data.outputs[i];
        const TargetSet t = assign(rule, data.images[i].gts, o.preds, data.layout, params);
        for (int j : t.foreground()) parts[i].push_back(o.dets[static_cast<std::size_t>(j)]);
      },
      threads);
  return concat(std::move(parts));
}

StudyReport run_study(const StudyConfig& cfg) {
  cfg.nms.validate();
  cfg.filter.validate();
  const StudyData data = simulate(cfg);
  const std::vector<double>& strides = data.layout.strides();
  const std::vector<Detection> all = data.all_dets();

  StudyReport report;
  report.num_images = static_cast<long>(data.images.size());
  for (const ImageRecord& im : data.images) report.num_gts += static_cast<long>(im.gts.size());
  report.num_preds = static_cast<long>(all.size());

  std::vector<AssignRule> rules = cfg.rules;
  if (rules.empty()) rules.assign(all_rules().begin(), all_rules().end());
  for (AssignRule rule : rules) {
    RuleRow row;
    row.rule = rule;
    row.one_to_one = is_one_to_one(rule);
    const std::vector<Detection> kept = rule_keep_set(data, rule, cfg.rule_params, cfg.threads);
    row.kept = static_cast<long>(kept.size());
    row.without_nms = evaluate(kept, data.images, cfg.eval);
    row.with_nms = evaluate(apply_nms(kept, cfg.nms, strides), data.images, cfg.eval);
    report.rules.push_back(std::move(row));
  }

  const std::vector<NmsConfig> configs = study_configs(cfg.nms.iou_threshold);
  report.nms = nms_study(all, data.images, configs, strides, cfg.eval);

  const std::vector<Detection> nms_kept = apply_nms(all, cfg.nms, strides);
  const std::vector<Detection> hard_kept = hard_3dmf_keep(data, cfg.filter, cfg.threads);
  report.post.push_back({"none", static_cast<long>(all.size()), evaluate(all, data.images, cfg.eval)});
  report.post.push_back(
      {"nms", static_cast<long>(nms_kept.size()), evaluate(nms_kept, data.images, cfg.eval)});
  report.post.push_back({"hard_3dmf", static_cast<long>(hard_kept.size()),
                         evaluate(hard_kept, data.images, cfg.eval)});
  return report;
}

std::string rules_csv(const StudyReport& r) {
  std::string out =
      "rule,one_to_one,kept,mAP_nms,mAP_no_nms,delta,AP50_nms,AP50_no_nms,AR_nms,AR_no_nms,"
      "duplicates_no_nms\n";
  for (const RuleRow& row : r.rules) {
    out += std::string(to_string(row.rule)) + "," + (row.one_to_one ? "true" : "false") + "," +
           std::to_string(row.kept) + "," + fmt6(row.with_nms.mAP) + "," +
           fmt6(row.without_nms.mAP) + "," + fmt6(row.delta()) + "," + fmt6(row.with_nms.AP50) +
           "," + fmt6(row.without_nms.AP50) + "," + fmt6(row.with_nms.AR) + "," +
           fmt6(row.without_nms.AR) + "," + std::to_string(row.without_nms.duplicate_count) + "\n";
  }
  return out;
}

std::string postprocess_csv(const StudyReport& r) {
  std::string out = "method,kept,mAP,AP50,AP75,AR,duplicates\n";
  for (const PostRow& row : r.post) {
    out += row.method + "," + std::to_string(row.kept) + "," + fmt6(row.result.mAP) + "," +
           fmt6(row.result.AP50) + "," + fmt6(row.result.AP75) + "," + fmt6(row.result.AR) + "," +
           std::to_string(row.result.duplicate_count) + "\n";
  }
  return out;
}

std::string study_summary(const StudyReport& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "images %ld, gts %ld, predictions %ld\n\n", r.num_images,
                r.num_gts, r.num_preds);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-14s %-4s %8s %10s %10s %8s\n", "rule", "1:1", "kept",
                "mAP w/NMS", "w/o NMS", "delta");
  out += buf;
  for (const RuleRow& row : r.rules) {
    std::snprintf(buf, sizeof buf, "%-14s %-4s %8ld %10.4f %10.4f %8.4f\n",
                  std::string(to_string(row.rule)).c_str(), row.one_to_one ? "yes" : "no",
                  row.kept, row.with_nms.mAP, row.without_nms.mAP, row.delta());
    out += buf;
  }
  out += "\nNMS variants on all predictions\n";
  for (const NmsRow& row : r.nms) {
    std::snprintf(buf, sizeof buf, "  %-12s range %-4s mAP %.4f\n",
                  row.config.across_scales ? "across" : "per-scale",
                  row.config.range_label().c_str(), row.result.mAP);
    out += buf;
  }
  out += "\nPost-processing\n";
  for (const PostRow& row : r.post) {
    std::snprintf(buf, sizeof buf, "  %-10s kept %6ld mAP %.4f dup %d\n", row.method.c_str(),
                  row.kept, row.result.mAP, row.result.duplicate_count);
    out += buf;
  }
  return out;
}

}  // namespace e2edet
