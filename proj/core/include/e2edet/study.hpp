#pragma once

#include <span>
#include <string>
#include <vector>

#include "e2edet/assign_rules.hpp"
#include "e2edet/metrics.hpp"
#include "e2edet/nms.hpp"
#include "e2edet/pyramid.hpp"
#include "e2edet/sim.hpp"

namespace e2edet {

struct NmsRow {
  int config_id = 0;
  NmsConfig config;
  EvalResult result;
};

/// Evaluates `dets` after each NMS config.
std::vector<NmsRow> nms_study(std::span<const Detection> dets, std::span<const ImageRecord> images,
                              std::span<const NmsConfig> configs, std::span<const double> strides,
                              const EvalOptions& eval = {});

/// config_id, across_scales, spatial_range, AP, AP50, AP75, AR (AP is the .50:.95 mean).
std::string nms_study_csv(std::span<const NmsRow> rows);

struct StudyConfig {
  SceneConfig scene;
  OracleConfig oracle;
  int images = 200;
  std::vector<AssignRule> rules;  // empty = every rule
  RuleParams rule_params;
  NmsConfig nms;                  // the "w/ NMS" setting
  FilterParams filter;            // hard 3D max filtering
  EvalOptions eval;
  int threads = 0;                // 0 = thread_count()
};

struct RuleRow {
  AssignRule rule = AssignRule::kPoto;
  bool one_to_one = true;
  long kept = 0;
  EvalResult without_nms;
  EvalResult with_nms;
  /// mAP without NMS minus mAP with NMS.
  double delta() const noexcept { return without_nms.mAP - with_nms.mAP; }
};

struct PostRow {
  std::string method;  // none | nms | hard_3dmf
  long kept = 0;
  EvalResult result;
};

struct StudyReport {
  long num_images = 0;
  long num_gts = 0;
  long num_preds = 0;
  std::vector<RuleRow> rules;
  std::vector<NmsRow> nms;
  std::vector<PostRow> post;
};

/// Shared simulated input of a study run.
struct StudyData {
  PyramidLayout layout;
  std::vector<ImageRecord> images;
  std::vector<OracleOutput> outputs;  // per image
  std::vector<Detection> all_dets() const;
};

StudyData simulate(const StudyConfig& cfg);

/// Detections surviving hard 3D max filtering of each image's score pyramid.
std::vector<Detection> hard_3dmf_keep(const StudyData& data, FilterParams filter, int threads = 0);

/// Detections a rule marks foreground (one-to-one rules) or every detection (one-to-many).
std::vector<Detection> rule_keep_set(const StudyData& data, AssignRule rule,
                                     const RuleParams& params, int threads = 0);

/// One-to-one rules keep their foreground, one-to-many rules keep everything;
/// each keep-set is evaluated with and without NMS. Also runs the NMS study and
/// compares hard 3D max filtering with NMS on the full prediction set.
StudyReport run_study(const StudyConfig& cfg);

std::string rules_csv(const StudyReport& r);
std::string postprocess_csv(const StudyReport& r);
std::string study_summary(const StudyReport& r);

}  // namespace e2edet
