#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "e2edet/dataset.hpp"
#include "e2edet/layout.hpp"
#include "e2edet/pyramid.hpp"

namespace e2edet {

struct SceneConfig {
  int image_size = 512;
  int min_instances = 2;
  int max_instances = 8;
  double min_size = 16.0;   // box side, log-uniform between min and max
  double max_size = 384.0;
  double crowding = 0.0;    // target max-IoU of each box with its partner; 0 = no overlap
  int num_classes = 3;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

struct OracleConfig {
  int duplicates = 3;           // predictions per gt, the first one being the peak
  double decay = 0.8;           // score factor per cell of tube distance
  double jitter = 0.04;         // duplicate box noise, fraction of the gt side
  double cross_level_prob = 0.3;
  double far_prob = 0.4;        // same-level duplicates placed two cells out instead of one
  double loc_noise = 0.0;       // noise on the peak box, fraction of the gt side
  double min_score = 0.3;       // peak score drawn uniformly in [min_score, max_score]
  double max_score = 0.95;
  std::uint64_t seed = 2;

  void validate() const;
  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

/// Images with ids 1..n. Box corners are multiples of 1/16 px so they survive
/// the x,y,w,h round trip exactly. With crowding > 0, instances come in
/// same-class pairs whose IoU is the crowding target; pairs do not overlap each
/// other. Otherwise no two boxes overlap.
std::vector<ImageRecord> gen_scenes(const SceneConfig& cfg, int n);

/// Categories named class0.. with external ids 1..num_classes.
Dataset make_dataset(std::vector<ImageRecord> images, int num_classes);

/// Mean over boxes of the largest IoU with any other box in the same image;
/// images with a single box are skipped.
double mean_max_iou(std::span<const ImageRecord> images);

struct OracleOutput {
  std::vector<Prediction> preds;   // full per-class scores read from `scores`
  std::vector<Detection> dets;     // same order; category of the source gt
  std::vector<int> source_gt;
  std::vector<int> rank;           // 0 for the peak prediction
  FeaturePyramid scores;           // channels = classes
};

/// Score pyramid: each gt contributes s0 * decay^(d + |level - L|) on its class
/// channel, where L is its size level and d the Chebyshev distance (in level-L
/// cells) to its centre cell; channels take the max over gts. Each gt then gets
/// a peak prediction at its centre cell and duplicates one or two cells away or
/// on an adjacent level, each scored by the pyramid value it sits on.
OracleOutput oracle_predict(const ImageRecord& image, const PyramidLayout& layout,
                            const OracleConfig& cfg, int num_classes);

}  // namespace e2edet
