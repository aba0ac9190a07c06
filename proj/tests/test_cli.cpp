// End-to-end CLI tests: spawn the real binary and inspect its files and exit
// codes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "softsample/dataset.hpp"
#include "softsample/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = SOFTSAMPLE_CLI_PATH;
const std::string kDataDir = SOFTSAMPLE_DATA_DIR;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("softsample_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

int run(const std::string& args) {
  std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  return softsample::read_text_file(path);
}

}  // namespace

TEST_CASE("curate: rate 0 output equals the input modulo dropped=false") {
  TempDir tmp;
  std::string in = kDataDir + "/sample_dataset.json";
  REQUIRE(run("curate --in " + in + " --out " + tmp.file("out.json") +
              " --rate 0 --seed 1") == 0);
  softsample::Dataset original = softsample::load_dataset(in);
  softsample::Dataset curated = softsample::load_dataset(tmp.file("out.json"));
  CHECK(softsample::dataset_to_json(curated) ==
        softsample::dataset_to_json(original));
}

TEST_CASE("curate: identical runs produce identical bytes and a manifest") {
  TempDir tmp;
  std::string in = kDataDir + "/sample_dataset.json";
  std::string base = "curate --in " + in + " --rate 0.3 --seed 7 --out ";
  REQUIRE(run(base + tmp.file("a.json")) == 0);
  REQUIRE(run(base + tmp.file("b.json")) == 0);
  CHECK(slurp(tmp.file("a.json")) == slurp(tmp.file("b.json")));
  CHECK(slurp(tmp.file("a.drop_record.json")) ==
        slurp(tmp.file("b.drop_record.json")));

  json manifest = json::parse(slurp(tmp.file("a.manifest.json")));
  CHECK(manifest["command"] == "curate");
  CHECK(manifest["seeds"][0] == 7);
  CHECK(manifest["inputs"][0]["digest"].get<std::string>().size() == 16);
  CHECK(manifest["config"]["rate"] == 0.3);
}

TEST_CASE("curate: drop record counts follow round-half-up per class") {
  TempDir tmp;
  REQUIRE(run("curate --in " + kDataDir + "/sample_dataset.json --out " +
              tmp.file("c.json") + " --rate 0.3 --seed 11") == 0);
  json record = json::parse(slurp(tmp.file("c.drop_record.json")));
  // Bundled sample: person 21, car 14, dog 9.
  CHECK(record["per_class_dropped"]["0"] == 6);
  CHECK(record["per_class_dropped"]["1"] == 4);
  CHECK(record["per_class_dropped"]["2"] == 3);
}

TEST_CASE("curate: malformed input exits with the data-error code") {
  TempDir tmp;
  std::ofstream(tmp.file("bad.json")) << "{broken";
  CHECK(run("curate --in " + tmp.file("bad.json") + " --out " +
            tmp.file("x.json") + " --rate 0.3 --seed 1") == 2);
}

TEST_CASE("usage errors exit with code 1") {
  TempDir tmp;
  CHECK(run("curate --in missing.json") == 1);      // missing required flags
  CHECK(run("unknown-subcommand") == 1);
  CHECK(run("weigh --in " + kDataDir + "/sample_dataset.json --out " +
            tmp.file("w.json") + " --strategy score-ss") == 1);
}

TEST_CASE("weigh: oss weight table over a curated dataset") {
  TempDir tmp;
  std::string in = kDataDir + "/sample_dataset.json";
  REQUIRE(run("curate --in " + in + " --out " + tmp.file("cur.json") +
              " --rate 0.3 --seed 3") == 0);
  REQUIRE(run("weigh --in " + tmp.file("cur.json") + " --out " +
              tmp.file("w.json") + " --strategy oss") == 0);
  json rows = json::parse(slurp(tmp.file("w.json")));
  REQUIRE(!rows.empty());
  for (const auto& row : rows) {
    double weight = row["weight"].get<double>();
    CHECK(weight >= 0.25 - 1e-9);
    CHECK(weight <= 1.0);
    if (row["label"].get<int>() >= 0) CHECK(weight == 1.0);
  }

  // CSV variant chosen by extension.
  REQUIRE(run("weigh --in " + tmp.file("cur.json") + " --out " +
              tmp.file("w.csv") + " --strategy hard-negative") == 0);
  CHECK(slurp(tmp.file("w.csv")).rfind("image_id,", 0) == 0);
}

TEST_CASE("eval: bundled fixture and threshold sweep") {
  TempDir tmp;
  std::string base = "eval --dets " + kDataDir + "/eval_fixture_detections.json" +
                     " --dataset " + kDataDir + "/eval_fixture_dataset.json" +
                     " --out " + tmp.file("report");
  REQUIRE(run(base + " --iou 0.5 --iou 0.75 --ap-mode all-points") == 0);

  json reports = json::parse(slurp(tmp.file("report.json")));
  REQUIRE(reports.size() == 2);
  CHECK(reports[0]["iou_threshold"] == 0.5);
  CHECK(reports[0]["per_class_ap"]["0"] == 0.5);
  CHECK(reports[0]["per_class_ap"]["1"] == 1.0);
  CHECK(reports[0]["map"] == 0.75);
  // mAP cannot increase with a stricter threshold.
  CHECK(reports[1]["map"].get<double>() <= reports[0]["map"].get<double>());

  CHECK(slurp(tmp.file("report.csv")).rfind("class_id,class_name,AP@0.5,AP@0.75",
                                            0) == 0);

  // Unknown classes in the detections exit with the data-error code.
  std::ofstream(tmp.file("bad_dets.json"))
      << R"([{"image_id": "e1", "class_id": 9, "box": [0,0,1,1], "score": 0.4}])";
  CHECK(run("eval --dets " + tmp.file("bad_dets.json") + " --dataset " +
            kDataDir + "/eval_fixture_dataset.json --out " +
            tmp.file("bad")) == 2);
}

TEST_CASE("eval: operating thresholds sidecar") {
  TempDir tmp;
  REQUIRE(run("eval --dets " + kDataDir + "/eval_fixture_detections.json" +
              " --dataset " + kDataDir + "/eval_fixture_dataset.json" +
              " --out " + tmp.file("report") + " --operating-thresholds " +
              tmp.file("op.json")) == 0);
  json op = json::parse(slurp(tmp.file("op.json")));
  CHECK(op.contains("cutoffs"));
  CHECK(op["cutoffs"]["0"] == 0.9);  // the lone TP's score
}

TEST_CASE("hist: CSV output and the no-proposals error") {
  TempDir tmp;
  REQUIRE(run("hist --in " + kDataDir + "/sample_dataset.json --out " +
              tmp.file("h.csv") + " --bin-width 0.1 --fg-thresh 0.5") == 0);
  std::string csv = slurp(tmp.file("h.csv"));
  CHECK(csv.rfind("bin_lo,bin_hi,probability,count", 0) == 0);

  REQUIRE(run("curate --in " + kDataDir + "/eval_fixture_dataset.json --out " +
              tmp.file("noprops.json") + " --rate 0 --seed 1") == 0);
  CHECK(run("hist --in " + tmp.file("noprops.json") + " --out " +
            tmp.file("h2.csv")) == 2);
}

TEST_CASE("simulate: deterministic table and manifest on the small config") {
  TempDir tmp;
  std::string base = "simulate --config " + kDataDir + "/simulate_small.json" +
                     " --out-dir ";
  REQUIRE(run(base + tmp.file("runA")) == 0);
  REQUIRE(run(base + tmp.file("runB")) == 0);

  std::string table = slurp(tmp.file("runA") + "/table.csv");
  CHECK(table == slurp(tmp.file("runB") + "/table.csv"));
  CHECK(slurp(tmp.file("runA") + "/results.json") ==
        slurp(tmp.file("runB") + "/results.json"));

  // 5 default strategies x header line.
  std::size_t lines = 0;
  for (char ch : table) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == 6);
  CHECK(table.rfind("strategy,drop_0,drop_0.3", 0) == 0);

  json manifest = json::parse(slurp(tmp.file("runA") + "/manifest.json"));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["config"]["config"]["n_seeds"] == 2);

  json results = json::parse(slurp(tmp.file("runA") + "/results.json"));
  CHECK(results.size() == 5 * 2);

  // Per-run logs exist for every cell and seed.
  std::size_t n_runs = 0;
  for (const auto& entry :
       fs::directory_iterator(tmp.file("runA") + "/runs"))
    n_runs += entry.is_regular_file();
  CHECK(n_runs == 5 * 2 * 2);
}

TEST_CASE("simulate: config schema violations exit with the data-error code") {
  TempDir tmp;
  std::ofstream(tmp.file("bad_config.json")) << R"({"scene": {"bogus": 1}})";
  CHECK(run("simulate --config " + tmp.file("bad_config.json") +
            " --out-dir " + tmp.file("out")) == 2);
}

TEST_CASE("convert-voc followed by eval-ready output") {
  TempDir tmp;
  fs::create_directories(tmp.file("voc"));
  std::ofstream(tmp.file("voc/scene1.xml")) << R"(<annotation>
    <filename>scene1.jpg</filename>
    <size><width>200</width><height>100</height></size>
    <object><name>boat</name>
      <bndbox><xmin>11</xmin><ymin>21</ymin><xmax>60</xmax><ymax>80</ymax></bndbox>
    </object>
    <object><name>buoy</name><difficult>1</difficult>
      <bndbox><xmin>100</xmin><ymin>10</ymin><xmax>150</xmax><ymax>60</ymax></bndbox>
    </object>
  </annotation>)";
  REQUIRE(run("convert-voc --annotations " + tmp.file("voc") + " --out " +
              tmp.file("voc.json") + " --provenance voc2007") == 0);

  softsample::Dataset ds = softsample::load_dataset(tmp.file("voc.json"));
  CHECK(ds.provenance == "voc2007");
  REQUIRE(ds.images.size() == 1);
  CHECK(ds.class_names.at(0) == "boat");
  CHECK(ds.class_names.at(1) == "buoy");
  CHECK(ds.images[0].annotations[0].box ==
        softsample::Box{10, 20, 60, 80});
  CHECK(ds.images[0].annotations[1].difficult);
}
