#include "softsample/voc.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>

#include "softsample/error.hpp"
#include "softsample/io.hpp"

namespace softsample {

namespace fs = std::filesystem;

namespace {

// Minimal element extraction for the fixed VOC annotation schema; no
// attributes, no CDATA.
std::optional<std::pair<std::size_t, std::size_t>> find_element(
    const std::string& text, const std::string& tag, std::size_t from) {
  std::string open = "<" + tag + ">";
  std::string close = "</" + tag + ">";
  std::size_t start = text.find(open, from);
  if (start == std::string::npos) return std::nullopt;
  std::size_t body = start + open.size();
  std::size_t end = text.find(close, body);
  if (end == std::string::npos)
    throw DataError("VOC annotation: unterminated <" + tag + "> element");
  return std::make_pair(body, end);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<std::string> child_text(const std::string& text,
                                      const std::string& tag,
                                      std::size_t scope_begin,
                                      std::size_t scope_end) {
  auto elem = find_element(text, tag, scope_begin);
  if (!elem || elem->first > scope_end) return std::nullopt;
  return trim(text.substr(elem->first, elem->second - elem->first));
}

double child_number(const std::string& text, const std::string& tag,
                    std::size_t scope_begin, std::size_t scope_end,
                    const std::string& context) {
  auto value = child_text(text, tag, scope_begin, scope_end);
  if (!value)
    throw DataError("VOC annotation: " + context + " is missing <" + tag + ">");
  try {
    return std::stod(*value);
  } catch (const std::exception&) {
    throw DataError("VOC annotation: " + context + ": <" + tag +
                    "> is not a number: '" + *value + "'");
  }
}

}  // namespace

ImageRecord parse_voc_annotation_xml(const std::string& xml_text,
                                     const std::string& fallback_id,
                                     std::map<std::string, int>& class_ids) {
  ImageRecord img;
  auto filename = find_element(xml_text, "filename", 0);
  if (filename) {
    std::string name =
        trim(xml_text.substr(filename->first, filename->second - filename->first));
    img.image_id = fs::path(name).stem().string();
  }
  if (img.image_id.empty()) img.image_id = fallback_id;

  auto size = find_element(xml_text, "size", 0);
  if (!size)
    throw DataError("VOC annotation " + fallback_id + ": missing <size>");
  img.width = child_number(xml_text, "width", size->first, size->second, "<size>");
  img.height = child_number(xml_text, "height", size->first, size->second, "<size>");
  if (img.width <= 0 || img.height <= 0)
    throw DataError("VOC annotation " + fallback_id +
                    ": width and height must be positive");

  std::size_t pos = 0;
  while (auto obj = find_element(xml_text, "object", pos)) {
    auto [begin, end] = *obj;
    auto name = child_text(xml_text, "name", begin, end);
    if (!name || name->empty())
      throw DataError("VOC annotation " + fallback_id +
                      ": <object> without a <name>");
    auto bndbox = find_element(xml_text, "bndbox", begin);
    if (!bndbox || bndbox->first > end)
      throw DataError("VOC annotation " + fallback_id + ": object '" + *name +
                      "' has no <bndbox>");

    Annotation ann;
    // VOC uses 1-based inclusive integer pixels; shift the mins down by one
    // to get continuous [0, width] x [0, height] coordinates.
    ann.box.x_min =
        child_number(xml_text, "xmin", bndbox->first, bndbox->second, "bndbox") - 1.0;
    ann.box.y_min =
        child_number(xml_text, "ymin", bndbox->first, bndbox->second, "bndbox") - 1.0;
    ann.box.x_max =
        child_number(xml_text, "xmax", bndbox->first, bndbox->second, "bndbox");
    ann.box.y_max =
        child_number(xml_text, "ymax", bndbox->first, bndbox->second, "bndbox");
    ann.box.x_min = std::clamp(ann.box.x_min, 0.0, img.width);
    ann.box.x_max = std::clamp(ann.box.x_max, 0.0, img.width);
    ann.box.y_min = std::clamp(ann.box.y_min, 0.0, img.height);
    ann.box.y_max = std::clamp(ann.box.y_max, 0.0, img.height);
    if (!ann.box.valid())
      throw DataError("VOC annotation " + fallback_id + ": object '" + *name +
                      "' has an inverted box");

    auto difficult = child_text(xml_text, "difficult", begin, end);
    ann.difficult = difficult && *difficult == "1";

    auto it = class_ids.find(*name);
    if (it == class_ids.end())
      it = class_ids.emplace(*name, static_cast<int>(class_ids.size())).first;
    ann.class_id = it->second;
    img.annotations.push_back(ann);
    pos = end;
  }
  return img;
}

Dataset convert_voc_annotations(const std::string& dir_path,
                                const std::string& provenance) {
  std::error_code ec;
  if (!fs::is_directory(dir_path, ec))
    throw DataError("VOC conversion: not a directory: " + dir_path);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir_path))
    if (entry.is_regular_file() && entry.path().extension() == ".xml")
      files.push_back(entry.path());
  if (files.empty())
    throw DataError("VOC conversion: no .xml files in " + dir_path);
  std::sort(files.begin(), files.end());

  // First pass assigns provisional ids in file order; remapped below so class
  // ids follow sorted class names, independent of file ordering quirks.
  std::map<std::string, int> provisional;
  Dataset ds;
  ds.provenance = provenance;
  for (const auto& f : files)
    ds.images.push_back(
        parse_voc_annotation_xml(read_text_file(f.string()), f.stem().string(),
                                 provisional));

  std::map<int, int> remap;
  int next = 0;
  for (const auto& [name, id] : provisional) {  // std::map iterates sorted
    remap[id] = next;
    ds.class_names[next] = name;
    ++next;
  }
  for (auto& img : ds.images)
    for (auto& a : img.annotations) a.class_id = remap.at(a.class_id);
  return ds;
}

}  // namespace softsample
