#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "softsample/dataset.hpp"
#include "softsample/error.hpp"
#include "softsample/eval.hpp"
#include "softsample/io.hpp"
#include "softsample/random.hpp"
#include "softsample/voc.hpp"

using namespace softsample;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = SOFTSAMPLE_DATA_DIR;

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() /
                 ("softsample_io_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("dataset JSON round-trips") {
  Dataset ds = load_dataset(kDataDir + "/sample_dataset.json");
  CHECK(ds.images.size() == 20);
  CHECK(ds.class_names.size() == 3);
  CHECK(ds.class_names.at(0) == "person");

  std::string once = dataset_to_json(ds);
  Dataset again = parse_dataset(once);
  CHECK(dataset_to_json(again) == once);
}

TEST_CASE("dataset parser reports the offending field") {
  CHECK_THROWS_WITH_AS(parse_dataset("{"), doctest::Contains("invalid JSON"),
                       DataError);
  CHECK_THROWS_WITH_AS(parse_dataset(R"({"classes": [], "images": [{"id": "x"}]})"),
                       doctest::Contains("images[0]"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_dataset(R"({"classes": [{"id": 0, "name": "a"}],
                        "images": [{"id": "x", "width": 10, "height": 10,
                                    "annotations": [{"box": [0,0,5,5], "class_id": 3}]}]})"),
      doctest::Contains("class_id 3"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_dataset(R"({"classes": [{"id": 0, "name": "a"}],
                        "images": [{"id": "x", "width": 10, "height": 10,
                                    "annotations": [{"box": [5,0,1,5], "class_id": 0}]}]})"),
      doctest::Contains("box"), DataError);
}

TEST_CASE("dataset ingestion clamps boxes to the image bounds") {
  Dataset ds = parse_dataset(R"({
    "classes": [{"id": 0, "name": "a"}],
    "images": [{"id": "x", "width": 100, "height": 50,
                "annotations": [{"box": [-5, -5, 120, 60], "class_id": 0}],
                "proposals": [{"box": [90, 40, 130, 70], "score": 0.5}]}]})");
  const Box& b = ds.images[0].annotations[0].box;
  CHECK(b == Box{0, 0, 100, 50});
  const Box& p = (*ds.images[0].proposals)[0].box;
  CHECK(p == Box{90, 40, 100, 50});
}

TEST_CASE("dropped defaults to false and provenance is preserved") {
  Dataset ds = parse_dataset(R"({
    "provenance": "voc2007",
    "classes": [{"id": 0, "name": "a"}],
    "images": [{"id": "x", "width": 10, "height": 10,
                "annotations": [{"box": [0,0,5,5], "class_id": 0}]}]})");
  CHECK(!ds.images[0].annotations[0].dropped);
  CHECK(ds.provenance == "voc2007");
  CHECK(parse_dataset(dataset_to_json(ds)).provenance == "voc2007");
}

TEST_CASE("detections round-trip and reject malformed entries") {
  auto dets = load_detections(kDataDir + "/eval_fixture_detections.json");
  REQUIRE(dets.size() == 3);
  CHECK(dets[0].image_id == "e1");
  CHECK(parse_detections(detections_to_json(dets)).size() == 3);

  CHECK_THROWS_AS(parse_detections("{}"), DataError);
  CHECK_THROWS_WITH_AS(parse_detections(R"([{"image_id": "a"}])"),
                       doctest::Contains("detections[0]"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_detections(
          R"([{"image_id": "a", "class_id": 0, "box": [0,0,1,1], "score": 1e999}])"),
      doctest::Contains("finite"), DataError);
}

TEST_CASE("atomic writes leave no temp file and read back verbatim") {
  fs::path dir = temp_dir();
  fs::path target = dir / "out.txt";
  write_text_file_atomic(target.string(), "hello\n");
  CHECK(read_text_file(target.string()) == "hello\n");
  write_text_file_atomic(target.string(), "replaced\n");
  CHECK(read_text_file(target.string()) == "replaced\n");
  CHECK(!fs::exists(target.string() + ".tmp"));
  fs::remove_all(dir);
}

TEST_CASE("file digest is stable and content-sensitive") {
  fs::path dir = temp_dir();
  fs::path f = dir / "digest.txt";
  write_text_file_atomic(f.string(), "abc");
  std::string d1 = file_digest_hex(f.string());
  CHECK(d1.size() == 16);
  CHECK(d1 == file_digest_hex(f.string()));
  write_text_file_atomic(f.string(), "abd");
  CHECK(d1 != file_digest_hex(f.string()));
  fs::remove_all(dir);
}

TEST_CASE("csv number formatting uses 6 significant digits") {
  CHECK(format_g6(0.5) == "0.5");
  CHECK(format_g6(1.0 / 3.0) == "0.333333");
  CHECK(format_g6(123456789.0) == "1.23457e+08");
  CHECK(format_g6(0.0) == "0");
}

TEST_CASE("rng streams are deterministic and tag-separated") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));

  Rng r1(7), r2(7);
  for (int i = 0; i < 100; ++i) {
    CHECK(r1.uniform01() == r2.uniform01());
    CHECK(r1.below(17) == r2.below(17));
    CHECK(r1.normal() == r2.normal());
  }
}

TEST_CASE("sample_without_replacement draws distinct indices") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 1 + rng.below(30);
    std::size_t k = rng.below(n + 1);
    auto picked = rng.sample_without_replacement(n, k);
    CHECK(picked.size() == k);
    std::set<std::size_t> unique(picked.begin(), picked.end());
    CHECK(unique.size() == k);
    for (std::size_t idx : picked) CHECK(idx < n);
  }
}

TEST_CASE("VOC annotation XML parses boxes, names and difficult flags") {
  std::string xml = R"(<annotation>
    <filename>img_007.jpg</filename>
    <size><width>640</width><height>480</height><depth>3</depth></size>
    <object>
      <name>dog</name>
      <difficult>0</difficult>
      <bndbox><xmin>49</xmin><ymin>12</ymin><xmax>200</xmax><ymax>199</ymax></bndbox>
    </object>
    <object>
      <name>cat</name>
      <difficult>1</difficult>
      <bndbox><xmin>1</xmin><ymin>1</ymin><xmax>640</xmax><ymax>480</ymax></bndbox>
    </object>
  </annotation>)";
  std::map<std::string, int> class_ids;
  ImageRecord img = parse_voc_annotation_xml(xml, "fallback", class_ids);
  CHECK(img.image_id == "img_007");
  CHECK(img.width == 640);
  CHECK(img.height == 480);
  REQUIRE(img.annotations.size() == 2);
  // 1-based inclusive pixels become continuous coordinates.
  CHECK(img.annotations[0].box == Box{48, 11, 200, 199});
  CHECK(!img.annotations[0].difficult);
  CHECK(img.annotations[1].box == Box{0, 0, 640, 480});
  CHECK(img.annotations[1].difficult);
}

TEST_CASE("VOC conversion assigns class ids by sorted name") {
  fs::path dir = temp_dir() / "voc";
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& object_name) {
    std::ofstream out(dir / name);
    out << "<annotation><filename>" << name
        << "</filename><size><width>100</width><height>100</height></size>"
        << "<object><name>" << object_name
        << "</name><bndbox><xmin>10</xmin><ymin>10</ymin><xmax>50</xmax>"
        << "<ymax>50</ymax></bndbox></object></annotation>";
  };
  write("b.xml", "zebra");
  write("a.xml", "aardvark");

  Dataset ds = convert_voc_annotations(dir.string(), "voc2007");
  CHECK(ds.provenance == "voc2007");
  REQUIRE(ds.images.size() == 2);
  CHECK(ds.images[0].image_id == "a");  // sorted by filename
  CHECK(ds.class_names.at(0) == "aardvark");
  CHECK(ds.class_names.at(1) == "zebra");
  CHECK(ds.images[0].annotations[0].class_id == 0);
  CHECK(ds.images[1].annotations[0].class_id == 1);

  CHECK_THROWS_AS(convert_voc_annotations((dir / "missing").string()), DataError);
  fs::remove_all(dir.parent_path());
}

TEST_CASE("VOC annotations without a size element are rejected") {
  std::map<std::string, int> class_ids;
  CHECK_THROWS_WITH_AS(
      parse_voc_annotation_xml("<annotation></annotation>", "x", class_ids),
      doctest::Contains("<size>"), DataError);
}
