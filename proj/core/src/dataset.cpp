#include "e2edet/dataset.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "e2edet/error.hpp"
#include "e2edet/pyramid_io.hpp"

namespace e2edet {

using nlohmann::json;

int Dataset::class_of(int category_id) const {
  for (std::size_t k = 0; k < categories.size(); ++k) {
    if (categories[k].id == category_id) return static_cast<int>(k);
  }
  throw ValidationError("unknown category_id " + std::to_string(category_id));
}

const ImageRecord* Dataset::find_image(int image_id) const noexcept {
  for (const ImageRecord& im : images) {
    if (im.id == image_id) return &im;
  }
  return nullptr;
}

namespace {

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
}

template <typename T>
T field(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(std::string(where) + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

Box box_from_xywh(const json& bbox, const char* where) {
  if (!bbox.is_array() || bbox.size() != 4) {
    throw ValidationError(std::string(where) + ": bbox must be [x, y, w, h]");
  }
  double v[4];
  for (std::size_t k = 0; k < 4; ++k) {
    if (!bbox[k].is_number()) throw ValidationError(std::string(where) + ": bbox entries must be numbers");
    v[k] = bbox[k].get<double>();
  }
  return {v[0], v[1], v[0] + v[2], v[1] + v[3]};
}

json xywh(const Box& b) { return json::array({b.x1, b.y1, b.x2 - b.x1, b.y2 - b.y1}); }

}  // namespace

Dataset parse_coco(std::string_view json_text) {
  const json root = parse_json(json_text);
  if (!root.is_object()) throw ValidationError("COCO file: top level must be an object");
  Dataset ds;
  for (const json& c : root.value("categories", json::array())) {
    ds.categories.push_back({field<int>(c, "id", "category"), c.value("name", std::string())});
  }
  for (const json& im : root.value("images", json::array())) {
    ImageRecord rec;
    rec.id = field<int>(im, "id", "image");
    rec.width = field<int>(im, "width", "image");
    rec.height = field<int>(im, "height", "image");
    rec.file_name = im.value("file_name", std::string());
    if (rec.width <= 0 || rec.height <= 0) {
      throw ValidationError("image " + std::to_string(rec.id) + ": size must be positive");
    }
    if (ds.find_image(rec.id) != nullptr) {
      throw ValidationError("duplicate image id " + std::to_string(rec.id));
    }
    ds.images.push_back(std::move(rec));
  }
  int auto_id = 1;
  for (const json& ann : root.value("annotations", json::array())) {
    const int image_id = field<int>(ann, "image_id", "annotation");
    auto it = std::find_if(ds.images.begin(), ds.images.end(),
                           [&](const ImageRecord& r) { return r.id == image_id; });
    if (it == ds.images.end()) {
      throw ValidationError("annotation refers to unknown image_id " + std::to_string(image_id));
    }
    GroundTruth gt;
    gt.category = ds.class_of(field<int>(ann, "category_id", "annotation"));
    gt.box = box_from_xywh(ann.at("bbox"), "annotation");
    gt.id = ann.contains("id") ? ann.at("id").get<int>() : auto_id;
    ++auto_id;
    if (gt.box.degenerate()) {
      throw ValidationError("annotation " + std::to_string(gt.id) + " has a degenerate box");
    }
    it->gts.push_back(gt);
  }
  return ds;
}

Dataset load_coco(const std::filesystem::path& path) { return parse_coco(read_file(path)); }

std::string export_coco(const Dataset& ds) {
  json root;
  root["images"] = json::array();
  root["annotations"] = json::array();
  root["categories"] = json::array();
  for (const Category& c : ds.categories) {
    root["categories"].push_back({{"id", c.id}, {"name", c.name}});
  }
  for (const ImageRecord& im : ds.images) {
    json j = {{"id", im.id}, {"width", im.width}, {"height", im.height}};
    if (!im.file_name.empty()) j["file_name"] = im.file_name;
    root["images"].push_back(j);
    for (const GroundTruth& gt : im.gts) {
      root["annotations"].push_back(
          {{"id", gt.id},
           {"image_id", im.id},
           {"category_id", ds.categories.at(static_cast<std::size_t>(gt.category)).id},
           {"bbox", xywh(gt.box)},
           {"area", gt.box.area()},
           {"iscrowd", 0}});
    }
  }
  return root.dump(1) + "\n";
}

PyramidLayout layout_for(const ImageRecord& image) {
  return PyramidLayout::fcos_default(image.width, image.height);
}

std::vector<Detection> parse_detections(std::string_view json_text, const Dataset& ds) {
  const json root = parse_json(json_text);
  if (!root.is_array()) throw ValidationError("detection file: top level must be an array");
  std::vector<Detection> dets;
  dets.reserve(root.size());
  for (const json& d : root) {
    Detection det;
    det.image_id = field<int>(d, "image_id", "detection");
    const ImageRecord* image = ds.find_image(det.image_id);
    if (image == nullptr) {
      throw ValidationError("detection refers to unknown image_id " +
                            std::to_string(det.image_id));
    }
    const PyramidLayout layout = layout_for(*image);
    det.category = ds.class_of(field<int>(d, "category_id", "detection"));
    det.box = box_from_xywh(d.at("bbox"), "detection");
    det.score = field<double>(d, "score", "detection");
    if (!(det.score >= 0.0 && det.score <= 1.0)) {
      throw ValidationError("detection score must lie in [0, 1]");
    }
    if (d.contains("scores")) {
      det.scores = d.at("scores").get<std::vector<double>>();
      if (static_cast<int>(det.scores.size()) != ds.num_classes()) {
        throw ValidationError("detection 'scores' must have one entry per category");
      }
    }
    if (d.contains("level") && d.contains("cell")) {
      det.level = d.at("level").get<int>();
      const auto cell = d.at("cell").get<std::vector<int>>();
      if (cell.size() != 2) throw ValidationError("detection cell must be [row, col]");
      det.cell = {cell[0], cell[1]};
      if (!layout.valid(det.level, det.cell)) {
        throw ValidationError("detection level/cell outside the pyramid layout");
      }
    } else {
      const LevelCell lc = layout.project(det.box);
      det.level = lc.level;
      det.cell = lc.cell;
    }
    dets.push_back(std::move(det));
  }
  return dets;
}

std::vector<Detection> load_detections(const std::filesystem::path& path, const Dataset& ds) {
  return parse_detections(read_file(path), ds);
}

std::string export_detections(std::span<const Detection> dets, const Dataset& ds) {
  json root = json::array();
  for (const Detection& d : dets) {
    json j = {{"image_id", d.image_id},
              {"category_id", ds.categories.at(static_cast<std::size_t>(d.category)).id},
              {"bbox", xywh(d.box)},
              {"score", d.score}};
    if (d.has_location()) {
      j["level"] = d.level;
      j["cell"] = {d.cell.row, d.cell.col};
    }
    if (!d.scores.empty()) j["scores"] = d.scores;
    root.push_back(j);
  }
  return root.dump(1) + "\n";
}

Prediction to_prediction(const Detection& det, int num_classes) {
  Prediction p;
  if (!det.scores.empty()) {
    p.scores = det.scores;
  } else {
    p.scores.assign(static_cast<std::size_t>(num_classes), 0.0);
    p.scores.at(static_cast<std::size_t>(det.category)) = det.score;
  }
  p.box = det.box;
  p.level = det.level;
  p.cell = det.cell;
  return p;
}

Detection to_detection(const Prediction& pred, int image_id) {
  Detection d;
  d.image_id = image_id;
  const auto best = std::max_element(pred.scores.begin(), pred.scores.end());
  d.category = best == pred.scores.end() ? 0 : static_cast<int>(best - pred.scores.begin());
  d.score = best == pred.scores.end() ? 0.0 : *best;
  d.box = pred.box;
  d.level = pred.level;
  d.cell = pred.cell;
  return d;
}

}  // namespace e2edet
