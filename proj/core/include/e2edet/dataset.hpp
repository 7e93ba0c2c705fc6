#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2edet/geometry.hpp"
#include "e2edet/layout.hpp"

namespace e2edet {

/// A scored box attributed to one image. level/cell are -1 when unknown.
struct Detection {
  int image_id = 0;
  int category = 0;  // contiguous class index
  Box box;
  double score = 0.0;
  int level = -1;
  Cell cell;
  std::vector<double> scores;  // optional full per-class vector

  bool has_location() const noexcept { return level >= 0 && cell.row >= 0 && cell.col >= 0; }
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct ImageRecord {
  int id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
  std::vector<GroundTruth> gts;
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Category {
  int id = 0;  // external (COCO) id
  std::string name;
  friend bool operator==(const Category&, const Category&) = default;
};

/// Annotations in internal form: corner boxes, contiguous class indices.
struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<Category> categories;

  int num_classes() const noexcept { return static_cast<int>(categories.size()); }
  /// Contiguous index of an external category id; throws ValidationError if unknown.
  int class_of(int category_id) const;
  const ImageRecord* find_image(int image_id) const noexcept;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// COCO annotation JSON: images[id,width,height], annotations[image_id,category_id,
/// bbox=[x,y,w,h]], categories[id,name]. Boxes become corner form.
Dataset parse_coco(std::string_view json_text);
Dataset load_coco(const std::filesystem::path& path);
std::string export_coco(const Dataset& ds);

/// Detection JSON: array of {image_id, category_id, bbox, score, level?, cell?: [row, col],
/// scores?: [...]}. Missing level/cell are filled by the Center-rule projection
/// on the default layout of the detection's image.
std::vector<Detection> parse_detections(std::string_view json_text, const Dataset& ds);
std::vector<Detection> load_detections(const std::filesystem::path& path, const Dataset& ds);
std::string export_detections(std::span<const Detection> dets, const Dataset& ds);

/// Dense-head view of a detection: one-hot score unless a full vector was given.
Prediction to_prediction(const Detection& det, int num_classes);

/// Detection carrying the prediction's best class.
Detection to_detection(const Prediction& pred, int image_id);

/// Default pyramid layout for an image (strides 8..128).
PyramidLayout layout_for(const ImageRecord& image);

}  // namespace e2edet
