#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "helpers.hpp"
#include "xr/datasets.hpp"
#include "xr/errors.hpp"

using namespace xr;
using xr::test::make_temp_dir;
using xr::test::read_file;

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << content;
}

std::string toy_manifest_text() {
  return R"({"kind":"dataset","name":"custom"}
{"kind":"image","id":"img_a","uri":"file://a.png"}
{"kind":"image","id":"img_b","uri":"file://b.png"}
{"kind":"query","id":"q1","ref":"img_a","text":"make it blue","targets":["img_b"]}
)";
}

// Miniature CIRR-val-shaped tree: 4 images, 2 queries with subsets.
void write_cirr_tree(const fs::path& root) {
  nlohmann::json splits{{"img0", "./dev/img0.png"},
                        {"img1", "./dev/img1.png"},
                        {"img2", "./dev/img2.png"},
                        {"img3", "./dev/img3.png"}};
  write_file(root / "image_splits" / "split.rc2.val.json", splits.dump());
  nlohmann::json caps = nlohmann::json::array();
  caps.push_back({{"pairid", 101},
                  {"reference", "img0"},
                  {"target_hard", "img1"},
                  {"caption", "turn the dog around"},
                  {"img_set", {{"members", {"img1", "img2", "img3"}}}}});
  caps.push_back({{"pairid", 102},
                  {"reference", "img2"},
                  {"target_hard", "img3"},
                  {"caption", "add a second bird"},
                  {"img_set", {{"members", {"img0", "img1", "img3"}}}}});
  write_file(root / "captions" / "cap.rc2.val.json", caps.dump());
}

void write_circo_tree(const fs::path& root) {
  nlohmann::json info{{"images", nlohmann::json::array()}};
  for (int i = 0; i < 5; ++i) {
    info["images"].push_back(
        {{"id", 1000 + i}, {"file_name", "00000" + std::to_string(i) + ".jpg"}});
  }
  write_file(root / "COCO2017_unlabeled" / "annotations" / "image_info_unlabeled2017.json",
             info.dump());
  nlohmann::json anns = nlohmann::json::array();
  anns.push_back({{"id", 0},
                  {"reference_img_id", 1000},
                  {"relative_caption", "has two cats instead of one"},
                  {"gt_img_ids", {1001, 1002}}});
  anns.push_back({{"id", 1},
                  {"reference_img_id", 1003},
                  {"relative_caption", "is outdoors"},
                  {"gt_img_ids", {1004}}});
  write_file(root / "annotations" / "val.json", anns.dump());
}

void write_fashioniq_tree(const fs::path& root) {
  nlohmann::json split = nlohmann::json::array({"B001", "B002", "B003"});
  write_file(root / "image_splits" / "split.dress.val.json", split.dump());
  nlohmann::json caps = nlohmann::json::array();
  caps.push_back({{"candidate", "B001"},
                  {"target", "B002"},
                  {"captions", {"is red", "has long sleeves"}}});
  caps.push_back({{"candidate", "B002"}, {"target", "B003"}, {"captions", {"is shorter", ""}}});
  write_file(root / "captions" / "cap.dress.val.json", caps.dump());
}

}  // namespace

TEST_CASE("toy manifest loads with correct cardinalities") {
  auto dir = make_temp_dir("xr_ds");
  write_file(dir / "toy.manifest", toy_manifest_text());
  Manifest m = load_manifest((dir / "toy.manifest").string());
  CHECK(m.dataset == DatasetKind::custom);
  CHECK(m.images.size() == 2);
  CHECK(m.queries.size() == 1);
  CHECK(m.queries[0].ref_id == "img_a");
  CHECK(m.queries[0].targets == std::vector<std::string>{"img_b"});

  const auto gt = m.ground_truth();
  CHECK(gt.at("q1").targets.count("img_b") == 1);
}

TEST_CASE("unknown references carry the offending line number") {
  auto dir = make_temp_dir("xr_ds");
  const std::string text = toy_manifest_text() +
                           R"({"kind":"query","id":"q2","ref":"ghost","text":"x","targets":["img_b"]})" +
                           "\n";
  write_file(dir / "bad.manifest", text);
  CHECK_THROWS_WITH_AS(load_manifest((dir / "bad.manifest").string()),
                       doctest::Contains("line 5"), ReferentialError);
}

TEST_CASE("manifest format errors are line-addressed") {
  auto dir = make_temp_dir("xr_ds");
  write_file(dir / "bad.manifest", "{\"kind\":\"image\",\"id\":\"a\",\"uri\":\"u\"}\nnot json\n");
  CHECK_THROWS_WITH_AS(load_manifest((dir / "bad.manifest").string()), doctest::Contains("line 2"),
                       FormatError);

  write_file(dir / "dup.manifest",
             "{\"kind\":\"image\",\"id\":\"a\",\"uri\":\"u\"}\n{\"kind\":\"image\",\"id\":\"a\",\"uri\":\"u\"}\n");
  CHECK_THROWS_AS(load_manifest((dir / "dup.manifest").string()), FormatError);

  write_file(dir / "kind.manifest", "{\"kind\":\"mystery\"}\n");
  CHECK_THROWS_AS(load_manifest((dir / "kind.manifest").string()), FormatError);
}

TEST_CASE("a subset that excludes every target is rejected") {
  auto dir = make_temp_dir("xr_ds");
  const std::string text =
      R"({"kind":"image","id":"a","uri":"u"}
{"kind":"image","id":"b","uri":"u"}
{"kind":"image","id":"c","uri":"u"}
{"kind":"query","id":"q","ref":"a","text":"x","targets":["b"],"subset":["a","c"]}
)";
  write_file(dir / "bad.manifest", text);
  CHECK_THROWS_AS(load_manifest((dir / "bad.manifest").string()), ReferentialError);
}

TEST_CASE("save and load round-trip the manifest") {
  auto dir = make_temp_dir("xr_ds");
  write_file(dir / "toy.manifest", toy_manifest_text());
  Manifest m = load_manifest((dir / "toy.manifest").string());
  save_manifest(m, (dir / "again.manifest").string());
  Manifest m2 = load_manifest((dir / "again.manifest").string());
  CHECK(m2.images.size() == m.images.size());
  CHECK(m2.queries.size() == m.queries.size());
  CHECK(m2.queries[0].id == m.queries[0].id);
  CHECK(m2.dataset == m.dataset);

  // Saving twice is byte-identical.
  save_manifest(m2, (dir / "third.manifest").string());
  CHECK(read_file(dir / "again.manifest") == read_file(dir / "third.manifest"));
}

TEST_CASE("cirr adapter converts the upstream layout") {
  auto dir = make_temp_dir("xr_ds");
  write_cirr_tree(dir / "raw");
  const auto out = (dir / "cirr.manifest").string();
  adapt_upstream(DatasetKind::cirr, (dir / "raw").string(), out);
  Manifest m = load_manifest(out);
  CHECK(m.dataset == DatasetKind::cirr);
  CHECK(m.images.size() == 4);
  CHECK(m.queries.size() == 2);
  CHECK(m.queries[0].id == "101");
  CHECK(m.queries[0].targets == std::vector<std::string>{"img1"});
  REQUIRE(m.queries[0].subset.has_value());
  CHECK(m.queries[0].subset->size() == 3);

  // Determinism: converting again yields identical bytes.
  const auto out2 = (dir / "cirr2.manifest").string();
  adapt_upstream(DatasetKind::cirr, (dir / "raw").string(), out2);
  CHECK(read_file(out) == read_file(out2));
}

TEST_CASE("circo adapter populates multi-target ground truth") {
  auto dir = make_temp_dir("xr_ds");
  write_circo_tree(dir / "raw");
  const auto out = (dir / "circo.manifest").string();
  adapt_upstream(DatasetKind::circo, (dir / "raw").string(), out);
  Manifest m = load_manifest(out);
  CHECK(m.dataset == DatasetKind::circo);
  CHECK(m.images.size() == 5);
  CHECK(m.queries.size() == 2);
  CHECK(m.queries[0].targets == std::vector<std::string>{"1001", "1002"});
}

TEST_CASE("fashioniq adapter joins the caption pair with ' and '") {
  auto dir = make_temp_dir("xr_ds");
  write_fashioniq_tree(dir / "raw");
  const auto out = (dir / "fiq.manifest").string();
  adapt_upstream(DatasetKind::fashioniq_dress, (dir / "raw").string(), out);
  Manifest m = load_manifest(out);
  CHECK(m.dataset == DatasetKind::fashioniq_dress);
  CHECK(m.images.size() == 3);
  CHECK(m.queries.size() == 2);
  CHECK(m.queries[0].text == "is red and has long sleeves");
  CHECK(m.queries[1].text == "is shorter");  // empty second caption dropped
  CHECK(m.queries[0].id == "dress-val-00000");
}

TEST_CASE("missing upstream files raise MissingFile") {
  auto dir = make_temp_dir("xr_ds");
  fs::create_directories(dir / "empty");
  CHECK_THROWS_AS(adapt_upstream(DatasetKind::cirr, (dir / "empty").string(), "out"),
                  MissingFile);
  CHECK_THROWS_AS(adapt_upstream(DatasetKind::fashioniq_dress, (dir / "empty").string(), "out"),
                  MissingFile);
  CHECK_THROWS_AS(adapt_upstream(DatasetKind::circo, (dir / "nowhere").string(), "out"),
                  MissingFile);
}

TEST_CASE("schema drift in upstream files is named") {
  auto dir = make_temp_dir("xr_ds");
  write_cirr_tree(dir / "raw");
  // Remove the caption field from one record.
  auto caps = nlohmann::json::parse(read_file(dir / "raw/captions/cap.rc2.val.json"));
  caps[0].erase("caption");
  write_file(dir / "raw/captions/cap.rc2.val.json", caps.dump());
  CHECK_THROWS_WITH_AS(
      adapt_upstream(DatasetKind::cirr, (dir / "raw").string(), (dir / "x.manifest").string()),
      doctest::Contains("caption"), SchemaDrift);
}
