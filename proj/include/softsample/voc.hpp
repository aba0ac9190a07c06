#pragma once

#include <string>

#include "softsample/dataset.hpp"

namespace softsample {

// Ingests a directory of PASCAL-VOC-style per-image XML annotation files
// (sorted by filename). Class ids are assigned by sorted class name. VOC's
// 1-based inclusive integer pixels are converted to continuous coordinates by
// shifting x_min/y_min down by one; "difficult" objects are imported with
// their flag set so evaluation can skip them.
Dataset convert_voc_annotations(const std::string& dir_path,
                                const std::string& provenance = "");

// Single-file variant, exposed for tests; image_id defaults to the filename
// stem when the XML lacks one.
ImageRecord parse_voc_annotation_xml(const std::string& xml_text,
                                     const std::string& fallback_id,
                                     std::map<std::string, int>& class_ids);

}  // namespace softsample
