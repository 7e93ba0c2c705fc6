#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "e2edet/assign_rules.hpp"
#include "e2edet/dataset.hpp"
#include "e2edet/dmf.hpp"
#include "e2edet/error.hpp"
#include "e2edet/metrics.hpp"
#include "e2edet/nms.hpp"
#include "e2edet/pyramid.hpp"
#include "e2edet/pyramid_io.hpp"
#include "e2edet/study.hpp"

namespace e2edet::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<KeySpec>& quality_keys() {
  static const std::vector<KeySpec> keys = {
      {"alpha", "0.8", "quality weight of IoU versus classification"},
      {"prior", "center_sampling", "spatial prior: center_sampling | inside_box | global"},
      {"fusion", "mul", "quality fusion: mul | add"},
      {"radius", "1.5", "centre-sampling radius in cells"},
      {"atss_k", "9", "candidates per level for atss rules"},
      {"topk_k", "9", "candidates for quality_topk"},
      {"focal_gamma", "2", "focal loss gamma (loss_cost rule)"},
      {"focal_alpha", "0.25", "focal loss alpha (loss_cost rule)"},
      {"reg_weight", "2", "GIoU loss weight (loss_cost rule)"},
  };
  return keys;
}

const std::vector<KeySpec>& nms_keys() {
  static const std::vector<KeySpec> keys = {
      {"nms_iou", "0.6", "NMS IoU threshold"},
      {"nms_across_scales", "true", "allow suppression across pyramid levels"},
      {"nms_range", "inf", "NMS window side in cells (odd) or inf"},
      {"score_floor", "0.05", "drop detections scoring below this before NMS"},
  };
  return keys;
}

const std::vector<KeySpec>& eval_keys() {
  static const std::vector<KeySpec> keys = {
      {"interp", "101", "AP interpolation: 101 | all"},
      {"max_dets", "100", "detections kept per image and class"},
  };
  return keys;
}

std::vector<KeySpec> join(std::initializer_list<std::vector<KeySpec>> parts) {
  std::vector<KeySpec> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<CommandSpec> build_specs() {
  const KeySpec out_dir{"out_dir", "e2edet_out", "directory for outputs"};
  const KeySpec threads{"threads", "0", "worker threads (0: E2EDET_THREADS or all cores)"};
  std::vector<CommandSpec> specs;
  specs.push_back(
      {"assign",
       "Assign predictions to ground truths with a label-assignment rule",
       join({{{"annotations", "", "COCO annotation JSON", true},
              {"predictions", "", "prediction JSON array", true},
              {"rule", "poto",
               "poto | anchor | center | fcos | atss | quality_atss | quality_fcos | "
               "quality_topk | loss_cost"}},
             quality_keys(),
             {out_dir}})});
  specs.push_back({"eval", "COCO-style AP/AR of detections, optionally after NMS",
                   join({{{"annotations", "", "COCO annotation JSON", true},
                          {"detections", "", "detection JSON array", true},
                          {"nms", "false", "apply NMS before evaluating"}},
                         nms_keys(),
                         eval_keys(),
                         {out_dir}})});
  specs.push_back({"filter", "3D max filtering of a pyramid dump",
                   {{"input", "", "pyramid dump", true},
                    {"mode", "soft", "soft: tube maximum | hard: keep tube maxima only"},
                    {"tau", "2", "adjacent scales in the tube (even)"},
                    {"phi", "3", "spatial window side (odd)"},
                    {"output", "", "output dump (default: <out_dir>/filtered.dfp)"},
                    {"heatmaps", "true", "write PGM heatmaps of input and output"},
                    out_dir}});
  specs.push_back(
      {"simulate", "Synthetic assignment/NMS study on the duplicate-emitting oracle",
       join({{{"seed", "1", "base seed (scenes use seed, oracle uses seed + 1)"},
              {"images", "200", "number of synthetic images"},
              {"image_size", "512", "square image side in pixels"},
              {"min_instances", "2", "fewest objects per image"},
              {"max_instances", "8", "most objects per image"},
              {"min_size", "16", "smallest box side"},
              {"max_size", "384", "largest box side"},
              {"crowding", "0", "IoU between paired objects (0: no overlap)"},
              {"classes", "3", "number of classes"},
              {"duplicates", "3", "predictions per object"},
              {"decay", "0.8", "score decay per cell of distance"},
              {"jitter", "0.04", "duplicate box noise, fraction of the object side"},
              {"cross_level_prob", "0.3", "probability a duplicate sits on an adjacent level"},
              {"far_prob", "0.4", "probability a same-level duplicate is two cells away"},
              {"loc_noise", "0", "noise on the best box, fraction of the object side"},
              {"min_score", "0.3", "lowest peak score"},
              {"max_score", "0.95", "highest peak score"},
              {"rules", "all", "comma-separated assignment rules, or all"}},
             quality_keys(),
             {{"nms_iou", "0.6", "NMS IoU threshold"},
              {"tau", "2", "hard 3D max filter scales"},
              {"phi", "3", "hard 3D max filter window"},
              {"heatmap_images", "1", "images whose score pyramids are written as PGM"}},
             eval_keys(),
             {threads, out_dir}})});
  specs.push_back({"nms-study", "Evaluate detections under the restricted NMS variants",
                   join({{{"annotations", "", "COCO annotation JSON", true},
                          {"detections", "", "detection JSON array", true},
                          {"nms_iou", "0.6", "NMS IoU threshold"},
                          {"score_floor", "0.05", "drop detections scoring below this"}},
                         eval_keys(),
                         {out_dir}})});
  specs.push_back({"gradcheck", "Finite-difference check of the DMF module backward pass",
                   {{"seed", "0", "RNG seed for weights and inputs"},
                    {"channels", "4", "feature channels"},
                    {"classes", "2", "logit channels"},
                    {"groups", "2", "group-norm groups (must divide channels)"},
                    {"height", "8", "finest level height"},
                    {"width", "8", "finest level width"},
                    {"levels", "3", "pyramid levels"},
                    {"tau", "2", "adjacent scales in the tube"},
                    {"phi", "3", "spatial window side"},
                    {"step", "0.001", "central-difference step"},
                    {"tolerance", "0.0001", "maximum relative error"},
                    {"denominator_floor", "0.001", "floor of the relative-error denominator"},
                    {"tie_adversarial", "false", "flat features that force exact ties"},
                    {"out_dir", "", "if set, also write gradcheck.txt there"}}});
  return specs;
}

// ---- parameter bundles ------------------------------------------------------

RuleParams rule_params(const RunConfig& c) {
  RuleParams p;
  p.quality.alpha = c.get_double("alpha");
  p.quality.prior = parse_prior(c.get_string("prior"));
  p.quality.fusion = parse_fusion(c.get_string("fusion"));
  p.quality.radius = c.get_double("radius");
  p.radius = p.quality.radius;
  p.atss_k = c.get_int("atss_k");
  p.topk_k = c.get_int("topk_k");
  p.loss.focal_gamma = c.get_double("focal_gamma");
  p.loss.focal_alpha = c.get_double("focal_alpha");
  p.loss.regression_weight = c.get_double("reg_weight");
  p.quality.validate();
  p.loss.validate();
  return p;
}

int parse_range(const std::string& v) {
  if (v == "inf") return kUnboundedRange;
  RunConfig tmp;
  tmp.set("nms_range", v);
  return tmp.get_int("nms_range");
}

NmsConfig nms_config(const RunConfig& c) {
  NmsConfig n;
  n.iou_threshold = c.get_double("nms_iou");
  n.across_scales = c.get_bool("nms_across_scales");
  n.spatial_range = parse_range(c.get_string("nms_range"));
  n.score_floor = c.get_double("score_floor");
  n.validate();
  return n;
}

EvalOptions eval_options(const RunConfig& c) {
  EvalOptions e;
  e.interp = parse_interpolation(c.get_string("interp"));
  e.max_dets = c.get_int("max_dets");
  if (e.max_dets <= 0) throw ValidationError("max_dets must be positive");
  return e;
}

FilterParams filter_params(const RunConfig& c) {
  FilterParams f{c.get_int("tau"), c.get_int("phi")};
  f.validate();
  return f;
}

fs::path prepare_out_dir(const RunConfig& c, const CommandSpec& spec) {
  const fs::path dir = c.get_string("out_dir");
  if (dir.empty()) return dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  RunConfig persisted = c;
  persisted.set("command", spec.name);
  write_file(dir / "run_config.txt", persisted.serialize());
  return dir;
}

std::vector<double> default_strides() { return PyramidLayout::fcos_default(1, 1).strides(); }

// ---- commands ---------------------------------------------------------------

int cmd_assign(const CommandSpec& spec, const RunConfig& c, std::ostream& out, std::ostream& err) {
  const AssignRule rule = parse_rule(c.get_string("rule"));
  const RuleParams params = rule_params(c);
  const Dataset ds = load_coco(c.get_string("annotations"));
  const std::vector<Detection> dets = load_detections(c.get_string("predictions"), ds);
  const fs::path dir = prepare_out_dir(c, spec);
  if (dets.empty()) err << "warning: no predictions; every ground truth stays unmatched\n";

  std::map<int, std::vector<int>> by_image;
  for (std::size_t i = 0; i < dets.size(); ++i) by_image[dets[i].image_id].push_back(static_cast<int>(i));

  nlohmann::json dump;
  dump["rule"] = std::string(to_string(rule));
  dump["images"] = nlohmann::json::array();
  long total_gts = 0;
  long total_fg = 0;
  long total_unmatched = 0;
  for (const ImageRecord& im : ds.images) {
    const std::vector<int>& idx = by_image[im.id];
    std::vector<Prediction> preds;
    preds.reserve(idx.size());
    for (int i : idx) preds.push_back(to_prediction(dets[static_cast<std::size_t>(i)], ds.num_classes()));
    const TargetSet t = assign(rule, im.gts, preds, layout_for(im), params);

    nlohmann::json j;
    j["image_id"] = im.id;
    j["foreground"] = nlohmann::json::array();
    for (std::size_t k = 0; k < preds.size(); ++k) {
      const int g = t.gt_of_pred[k];
      if (g < 0) continue;
      j["foreground"].push_back({{"prediction", idx[k]},
                                 {"gt_id", im.gts[static_cast<std::size_t>(g)].id}});
    }
    if (t.assignment) {
      j["pairs"] = nlohmann::json::array();
      for (const auto& [g, p] : t.assignment->pairs) {
        j["pairs"].push_back({im.gts[static_cast<std::size_t>(g)].id, idx[static_cast<std::size_t>(p)]});
      }
      j["objective"] = t.assignment->objective;
    }
    j["unmatched_gt_ids"] = nlohmann::json::array();
    for (int g : t.unmatched_gts) j["unmatched_gt_ids"].push_back(im.gts[static_cast<std::size_t>(g)].id);
    dump["images"].push_back(std::move(j));
    total_gts += static_cast<long>(im.gts.size());
    total_fg += static_cast<long>(t.foreground_count());
    total_unmatched += static_cast<long>(t.unmatched_gts.size());
  }
  write_file(dir / "assignment.json", dump.dump(1) + "\n");
  out << "rule " << to_string(rule) << ": images " << ds.images.size() << ", gts " << total_gts
      << ", predictions " << dets.size() << ", foreground " << total_fg << ", unmatched gts "
      << total_unmatched << "\n";
  return kExitOk;
}

int cmd_eval(const CommandSpec& spec, const RunConfig& c, std::ostream& out, std::ostream&) {
  const EvalOptions opts = eval_options(c);
  const bool use_nms = c.get_bool("nms");
  const NmsConfig nms = nms_config(c);
  const Dataset ds = load_coco(c.get_string("annotations"));
  std::vector<Detection> dets = load_detections(c.get_string("detections"), ds);
  const fs::path dir = prepare_out_dir(c, spec);
  if (use_nms) dets = apply_nms(dets, nms, default_strides());
  const EvalResult r = evaluate(dets, ds.images, opts);
  const std::string table = eval_table(r, &ds);
  write_file(dir / "eval.csv", eval_csv(r));
  write_file(dir / "eval.txt", table);
  out << table;
  return kExitOk;
}

int cmd_filter(const CommandSpec& spec, const RunConfig& c, std::ostream& out, std::ostream&) {
  const FilterParams f = filter_params(c);
  const std::string mode = c.get_string("mode");
  if (mode != "soft" && mode != "hard") throw ValidationError("mode must be soft or hard");
  const FeaturePyramid in = read_pyramid(c.get_string("input"));
  const fs::path dir = prepare_out_dir(c, spec);
  const FeaturePyramid result = mode == "hard" ? hard_3dmf(in, f) : max_filter_3d(in, f);
  const fs::path output =
      c.get_string("output").empty() ? dir / "filtered.dfp" : fs::path(c.get_string("output"));
  write_pyramid(output, result);
  out << "wrote " << output.string() << "\n";
  if (c.get_bool("heatmaps")) {
    for (const auto& p : write_heatmaps(in, dir, "input")) out << "wrote " << p.string() << "\n";
    for (const auto& p : write_heatmaps(result, dir, "filtered")) out << "wrote " << p.string() << "\n";
  }
  return kExitOk;
}

std::vector<AssignRule> parse_rule_list(const std::string& v) {
  std::vector<AssignRule> rules;
  if (v == "all") return rules;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) rules.push_back(parse_rule(item));
  }
  if (rules.empty()) throw ValidationError("rules: empty list");
  return rules;
}

int cmd_simulate(const CommandSpec& spec, const RunConfig& c, std::ostream& out, std::ostream&) {
  StudyConfig s;
  const std::uint64_t seed = c.get_u64("seed");
  s.scene.seed = seed;
  s.scene.image_size = c.get_int("image_size");
  s.scene.min_instances = c.get_int("min_instances");
  s.scene.max_instances = c.get_int("max_instances");
  s.scene.min_size = c.get_double("min_size");
  s.scene.max_size = c.get_double("max_size");
  s.scene.crowding = c.get_double("crowding");
  s.scene.num_classes = c.get_int("classes");
  s.oracle.seed = seed + 1;
  s.oracle.duplicates = c.get_int("duplicates");
  s.oracle.decay = c.get_double("decay");
  s.oracle.jitter = c.get_double("jitter");
  s.oracle.cross_level_prob = c.get_double("cross_level_prob");
  s.oracle.far_prob = c.get_double("far_prob");
  s.oracle.loc_noise = c.get_double("loc_noise");
  s.oracle.min_score = c.get_double("min_score");
  s.oracle.max_score = c.get_double("max_score");
  s.images = c.get_int("images");
  s.rules = parse_rule_list(c.get_string("rules"));
  s.rule_params = rule_params(c);
  s.nms.iou_threshold = c.get_double("nms_iou");
  s.filter = filter_params(c);
  s.eval = eval_options(c);
  s.threads = c.get_int("threads");
  const int heatmap_images = c.get_int("heatmap_images");
  s.scene.validate();
  s.oracle.validate();
  s.nms.validate();
  if (s.images < 0 || heatmap_images < 0 || s.threads < 0) {
    throw ValidationError("images, heatmap_images and threads must be non-negative");
  }
  const fs::path dir = prepare_out_dir(c, spec);

  const StudyReport report = run_study(s);
  write_file(dir / "rules.csv", rules_csv(report));
  write_file(dir / "nms_study.csv", nms_study_csv(report.nms));
  write_file(dir / "postprocess.csv", postprocess_csv(report));
  const std::string summary = study_summary(report);
  write_file(dir / "summary.txt", summary);

  // The study regenerates the same data from the same seeds.
  const StudyData data = simulate(s);
  const Dataset ds = make_dataset(data.images, s.scene.num_classes);
  write_file(dir / "scenes.json", export_coco(ds));
  write_file(dir / "predictions.json", export_detections(data.all_dets(), ds));
  const fs::path heat = dir / "heatmaps";
  const int n_heat = std::min<int>(heatmap_images, static_cast<int>(data.outputs.size()));
  for (int i = 0; i < n_heat; ++i) {
    const OracleOutput& o = data.outputs[static_cast<std::size_t>(i)];
    const std::string tag = "img" + std::to_string(data.images[static_cast<std::size_t>(i)].id);
    std::error_code ec;
    fs::create_directories(heat, ec);
    if (ec) throw IoError(heat.string(), "cannot create directory: " + ec.message());
    write_heatmaps(o.scores, heat, tag + "_scores");
    write_heatmaps(hard_3dmf(o.scores, s.filter), heat, tag + "_hard3dmf");
  }
  out << summary;
  return kExitOk;
}

int cmd_nms_study(const CommandSpec& spec, const RunConfig& c, std::ostream& out, std::ostream&) {
  const EvalOptions opts = eval_options(c);
  std::vector<NmsConfig> configs = study_configs(c.get_double("nms_iou"));
  const double floor = c.get_double("score_floor");
  for (NmsConfig& n : configs) {
    n.score_floor = floor;
    n.validate();
  }
  const Dataset ds = load_coco(c.get_string("annotations"));
  const std::vector<Detection> dets = load_detections(c.get_string("detections"), ds);
  const fs::path dir = prepare_out_dir(c, spec);
  const std::string csv = nms_study_csv(nms_study(dets, ds.images, configs, default_strides(), opts));
  write_file(dir / "nms_study.csv", csv);
  out << csv;
  return kExitOk;
}

int cmd_gradcheck(const CommandSpec& spec, const RunConfig& c, std::ostream& out, std::ostream&) {
  GradcheckOptions g;
  g.seed = c.get_u64("seed");
  g.channels = c.get_int("channels");
  g.classes = c.get_int("classes");
  g.groups = c.get_int("groups");
  g.height = c.get_int("height");
  g.width = c.get_int("width");
  g.levels = c.get_int("levels");
  g.filter = filter_params(c);
  g.step = c.get_double("step");
  g.tolerance = c.get_double("tolerance");
  g.denominator_floor = c.get_double("denominator_floor");
  g.tie_adversarial = c.get_bool("tie_adversarial");
  const fs::path dir = prepare_out_dir(c, spec);
  const GradcheckReport report = gradcheck_dmf(g);
  const std::string text = format_report(report);
  if (!dir.empty()) write_file(dir / "gradcheck.txt", text);
  out << text;
  return report.passed ? kExitOk : kExitValidation;
}

}  // namespace

const std::vector<CommandSpec>& command_specs() {
  static const std::vector<CommandSpec> specs = build_specs();
  return specs;
}

const CommandSpec& command_spec(std::string_view name) {
  for (const CommandSpec& s : command_specs()) {
    if (s.name == name) return s;
  }
  throw ValidationError("unknown command '" + std::string(name) + "'");
}

RunConfig resolve(const CommandSpec& spec, const RunConfig& given) {
  RunConfig out;
  for (const auto& [key, value] : given.values()) {
    if (key == "command") {
      if (value != spec.name) {
        throw ValidationError("config was written for command '" + value + "', not '" +
                              spec.name + "'");
      }
      continue;
    }
    const bool known = std::any_of(spec.keys.begin(), spec.keys.end(),
                                   [&](const KeySpec& k) { return k.name == key; });
    if (!known) throw ValidationError("unknown key '" + key + "' for command " + spec.name);
    out.set(key, value);
  }
  for (const KeySpec& k : spec.keys) {
    if (out.contains(k.name)) continue;
    if (k.required) throw ValidationError("missing required key '" + k.name + "'");
    out.set(k.name, k.default_value);
  }
  return out;
}

int run_command(const CommandSpec& spec, const RunConfig& cfg, std::ostream& out,
                std::ostream& err) {
  if (spec.name == "assign") return cmd_assign(spec, cfg, out, err);
  if (spec.name == "eval") return cmd_eval(spec, cfg, out, err);
  if (spec.name == "filter") return cmd_filter(spec, cfg, out, err);
  if (spec.name == "simulate") return cmd_simulate(spec, cfg, out, err);
  if (spec.name == "nms-study") return cmd_nms_study(spec, cfg, out, err);
  if (spec.name == "gradcheck") return cmd_gradcheck(spec, cfg, out, err);
  throw ValidationError("unknown command '" + spec.name + "'");
}

}  // namespace e2edet::cli
