#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softsample/geometry.hpp"
#include "softsample/sampling.hpp"

namespace softsample {

struct Annotation {
  Box box;
  int class_id = 0;
  bool dropped = false;
  bool difficult = false;
};

struct Proposal {
  Box box;
  double score = 0.0;
};

struct ImageRecord {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<Annotation> annotations;
  std::optional<std::vector<Proposal>> proposals;

  std::size_t kept_count() const;
  std::vector<LabeledBox> kept_boxes() const;     // dropped excluded
  std::vector<Box> dropped_boxes() const;
};

struct Dataset {
  std::vector<ImageRecord> images;
  std::map<int, std::string> class_names;
  std::string provenance;  // e.g. "voc2007"; empty when unknown

  std::size_t total_proposals() const;
  std::map<int, std::size_t> annotation_counts(bool kept_only = false) const;
};

// JSON document layout:
//   {"classes": [{"id": 0, "name": "..."}],
//    "images": [{"id": "...", "width": W, "height": H,
//                "annotations": [{"box": [x_min, y_min, x_max, y_max],
//                                 "class_id": 0, "dropped": false}],
//                "proposals": [{"box": [...], "score": 0.9}]}]}
// "dropped" defaults to false, "proposals" is optional, and an optional
// top-level "provenance" string tags the dataset's origin. Boxes are clamped
// to the image bounds on ingestion.
Dataset parse_dataset(const std::string& json_text);
Dataset load_dataset(const std::string& path);
std::string dataset_to_json(const Dataset& ds);
void save_dataset(const Dataset& ds, const std::string& path);

}  // namespace softsample
