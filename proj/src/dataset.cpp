#include "softsample/dataset.hpp"

#include <json.hpp>

#include <algorithm>

#include "softsample/error.hpp"
#include "softsample/io.hpp"

namespace softsample {

using nlohmann::ordered_json;

std::size_t ImageRecord::kept_count() const {
  std::size_t n = 0;
  for (const auto& a : annotations)
    if (!a.dropped) ++n;
  return n;
}

std::vector<LabeledBox> ImageRecord::kept_boxes() const {
  std::vector<LabeledBox> out;
  for (const auto& a : annotations)
    if (!a.dropped) out.push_back({a.box, a.class_id});
  return out;
}

std::vector<Box> ImageRecord::dropped_boxes() const {
  std::vector<Box> out;
  for (const auto& a : annotations)
    if (a.dropped) out.push_back(a.box);
  return out;
}

std::size_t Dataset::total_proposals() const {
  std::size_t n = 0;
  for (const auto& img : images)
    if (img.proposals) n += img.proposals->size();
  return n;
}

std::map<int, std::size_t> Dataset::annotation_counts(bool kept_only) const {
  std::map<int, std::size_t> counts;
  for (const auto& img : images)
    for (const auto& a : img.annotations)
      if (!kept_only || !a.dropped) ++counts[a.class_id];
  return counts;
}

namespace {

[[noreturn]] void field_error(const std::string& where, const std::string& what) {
  throw DataError("dataset: " + where + ": " + what);
}

double require_number(const ordered_json& j, const char* key,
                      const std::string& where) {
  if (!j.contains(key)) field_error(where, std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) field_error(where + "." + key, "expected a number");
  return v.get<double>();
}

Box parse_box(const ordered_json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4)
    field_error(where, "expected [x_min, y_min, x_max, y_max]");
  for (const auto& v : j)
    if (!v.is_number()) field_error(where, "box coordinates must be numbers");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
        j[3].get<double>()};
  if (!b.valid()) field_error(where, "box has x_min > x_max or y_min > y_max");
  return b;
}

Box clamp_box(Box b, double width, double height) {
  b.x_min = std::clamp(b.x_min, 0.0, width);
  b.x_max = std::clamp(b.x_max, 0.0, width);
  b.y_min = std::clamp(b.y_min, 0.0, height);
  b.y_max = std::clamp(b.y_max, 0.0, height);
  return b;
}

ordered_json box_to_json(const Box& b) {
  return ordered_json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

}  // namespace

Dataset parse_dataset(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("dataset: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("dataset: top level must be an object");

  Dataset ds;
  if (doc.contains("provenance")) {
    if (!doc["provenance"].is_string())
      field_error("provenance", "expected a string");
    ds.provenance = doc["provenance"].get<std::string>();
  }

  if (!doc.contains("classes") || !doc["classes"].is_array())
    throw DataError("dataset: missing 'classes' array");
  for (std::size_t i = 0; i < doc["classes"].size(); ++i) {
    const auto& c = doc["classes"][i];
    std::string where = "classes[" + std::to_string(i) + "]";
    if (!c.is_object() || !c.contains("id") || !c.contains("name") ||
        !c["id"].is_number_integer() || !c["name"].is_string())
      field_error(where, "expected {id: int, name: string}");
    int id = c["id"].get<int>();
    if (id < 0) field_error(where, "class id must be >= 0");
    if (ds.class_names.count(id)) field_error(where, "duplicate class id");
    ds.class_names[id] = c["name"].get<std::string>();
  }

  if (!doc.contains("images") || !doc["images"].is_array())
    throw DataError("dataset: missing 'images' array");
  for (std::size_t i = 0; i < doc["images"].size(); ++i) {
    const auto& jimg = doc["images"][i];
    std::string where = "images[" + std::to_string(i) + "]";
    if (!jimg.is_object()) field_error(where, "expected an object");
    ImageRecord img;
    if (!jimg.contains("id") || !jimg["id"].is_string())
      field_error(where, "missing string field 'id'");
    img.image_id = jimg["id"].get<std::string>();
    img.width = require_number(jimg, "width", where);
    img.height = require_number(jimg, "height", where);
    if (img.width <= 0 || img.height <= 0)
      field_error(where, "width and height must be positive");

    if (jimg.contains("annotations")) {
      if (!jimg["annotations"].is_array())
        field_error(where + ".annotations", "expected an array");
      for (std::size_t k = 0; k < jimg["annotations"].size(); ++k) {
        const auto& ja = jimg["annotations"][k];
        std::string awhere = where + ".annotations[" + std::to_string(k) + "]";
        if (!ja.is_object()) field_error(awhere, "expected an object");
        Annotation ann;
        if (!ja.contains("box")) field_error(awhere, "missing field 'box'");
        ann.box = clamp_box(parse_box(ja["box"], awhere + ".box"), img.width,
                            img.height);
        if (!ja.contains("class_id") || !ja["class_id"].is_number_integer())
          field_error(awhere, "missing integer field 'class_id'");
        ann.class_id = ja["class_id"].get<int>();
        if (!ds.class_names.count(ann.class_id))
          field_error(awhere, "class_id " + std::to_string(ann.class_id) +
                                  " not present in 'classes'");
        if (ja.contains("dropped")) {
          if (!ja["dropped"].is_boolean())
            field_error(awhere + ".dropped", "expected a boolean");
          ann.dropped = ja["dropped"].get<bool>();
        }
        if (ja.contains("difficult")) {
          if (!ja["difficult"].is_boolean())
            field_error(awhere + ".difficult", "expected a boolean");
          ann.difficult = ja["difficult"].get<bool>();
        }
        img.annotations.push_back(ann);
      }
    }

    if (jimg.contains("proposals")) {
      if (!jimg["proposals"].is_array())
        field_error(where + ".proposals", "expected an array");
      std::vector<Proposal> props;
      for (std::size_t k = 0; k < jimg["proposals"].size(); ++k) {
        const auto& jp = jimg["proposals"][k];
        std::string pwhere = where + ".proposals[" + std::to_string(k) + "]";
        if (!jp.is_object()) field_error(pwhere, "expected an object");
        Proposal p;
        if (!jp.contains("box")) field_error(pwhere, "missing field 'box'");
        p.box = clamp_box(parse_box(jp["box"], pwhere + ".box"), img.width,
                          img.height);
        p.score = jp.contains("score") ? require_number(jp, "score", pwhere) : 0.0;
        props.push_back(p);
      }
      img.proposals = std::move(props);
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

Dataset load_dataset(const std::string& path) {
  try {
    return parse_dataset(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string dataset_to_json(const Dataset& ds) {
  ordered_json doc;
  if (!ds.provenance.empty()) doc["provenance"] = ds.provenance;
  doc["classes"] = ordered_json::array();
  for (const auto& [id, name] : ds.class_names)
    doc["classes"].push_back({{"id", id}, {"name", name}});
  doc["images"] = ordered_json::array();
  for (const auto& img : ds.images) {
    ordered_json jimg;
    jimg["id"] = img.image_id;
    jimg["width"] = img.width;
    jimg["height"] = img.height;
    jimg["annotations"] = ordered_json::array();
    for (const auto& a : img.annotations) {
      ordered_json ja;
      ja["box"] = box_to_json(a.box);
      ja["class_id"] = a.class_id;
      ja["dropped"] = a.dropped;
      if (a.difficult) ja["difficult"] = true;
      jimg["annotations"].push_back(std::move(ja));
    }
    if (img.proposals) {
      jimg["proposals"] = ordered_json::array();
      for (const auto& p : *img.proposals)
        jimg["proposals"].push_back(
            {{"box", box_to_json(p.box)}, {"score", p.score}});
    }
    doc["images"].push_back(std::move(jimg));
  }
  return doc.dump(2) + "\n";
}

void save_dataset(const Dataset& ds, const std::string& path) {
  write_text_file_atomic(path, dataset_to_json(ds));
}

}  // namespace softsample
