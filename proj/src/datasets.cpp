#include "xr/datasets.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "xr/errors.hpp"
#include "xr/text.hpp"

namespace fs = std::filesystem;

namespace xr {

const char* to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::cirr: return "cirr";
    case DatasetKind::circo: return "circo";
    case DatasetKind::fashioniq_shirt: return "fashioniq_shirt";
    case DatasetKind::fashioniq_dress: return "fashioniq_dress";
    case DatasetKind::fashioniq_toptee: return "fashioniq_toptee";
    case DatasetKind::custom: return "custom";
  }
  return "custom";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
  if (name == "cirr") return DatasetKind::cirr;
  if (name == "circo") return DatasetKind::circo;
  if (name == "fashioniq_shirt") return DatasetKind::fashioniq_shirt;
  if (name == "fashioniq_dress") return DatasetKind::fashioniq_dress;
  if (name == "fashioniq_toptee") return DatasetKind::fashioniq_toptee;
  if (name == "custom") return DatasetKind::custom;
  throw InputError("unknown dataset kind: " + name);
}

std::map<std::string, GroundTruth> Manifest::ground_truth() const {
  std::map<std::string, GroundTruth> gt;
  for (const auto& q : queries) {
    if (q.targets.empty()) continue;
    GroundTruth g;
    g.query_id = q.id;
    g.targets.insert(q.targets.begin(), q.targets.end());
    if (q.subset) g.subset = std::set<std::string>(q.subset->begin(), q.subset->end());
    gt.emplace(q.id, std::move(g));
  }
  return gt;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);

  Manifest manifest;
  std::unordered_set<std::string> image_ids;
  std::unordered_set<std::string> query_ids;
  std::vector<std::size_t> query_lines;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError("manifest " + path + " line " + std::to_string(line_no) + ": " +
                        ex.what());
    }
    const std::string kind = rec.value("kind", "");
    if (kind == "dataset") {
      manifest.dataset = dataset_kind_from_string(rec.at("name").get<std::string>());
    } else if (kind == "image") {
      ImageHandle img{rec.at("id").get<std::string>(), rec.at("uri").get<std::string>()};
      if (img.id.empty() || img.uri.empty())
        throw FormatError("manifest line " + std::to_string(line_no) + ": empty image id or uri");
      if (!image_ids.insert(img.id).second)
        throw FormatError("manifest line " + std::to_string(line_no) + ": duplicate image id " +
                          img.id);
      manifest.images.push_back(std::move(img));
    } else if (kind == "query") {
      ManifestQuery q;
      q.id = rec.at("id").get<std::string>();
      q.ref_id = rec.at("ref").get<std::string>();
      q.text = rec.at("text").get<std::string>();
      q.targets = rec.value("targets", std::vector<std::string>{});
      if (rec.contains("subset")) q.subset = rec.at("subset").get<std::vector<std::string>>();
      if (trim(q.text).empty())
        throw FormatError("manifest line " + std::to_string(line_no) + ": empty query text");
      if (!query_ids.insert(q.id).second)
        throw FormatError("manifest line " + std::to_string(line_no) + ": duplicate query id " +
                          q.id);
      query_lines.push_back(line_no);
      manifest.queries.push_back(std::move(q));
    } else {
      throw FormatError("manifest line " + std::to_string(line_no) + ": unknown record kind \"" +
                        kind + "\"");
    }
  }

  for (std::size_t qi = 0; qi < manifest.queries.size(); ++qi) {
    const auto& q = manifest.queries[qi];
    const std::string at = " (manifest line " + std::to_string(query_lines[qi]) + ")";
    if (!image_ids.count(q.ref_id))
      throw ReferentialError("query " + q.id + " references unknown image " + q.ref_id + at);
    for (const auto& t : q.targets)
      if (!image_ids.count(t))
        throw ReferentialError("query " + q.id + " targets unknown image " + t + at);
    if (q.subset) {
      for (const auto& s : *q.subset)
        if (!image_ids.count(s))
          throw ReferentialError("query " + q.id + " subset has unknown image " + s + at);
      if (!q.targets.empty()) {
        bool overlap = false;
        for (const auto& t : q.targets)
          overlap = overlap || std::find(q.subset->begin(), q.subset->end(), t) != q.subset->end();
        if (!overlap)
          throw ReferentialError("query " + q.id + " subset excludes every target" + at);
      }
    }
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << nlohmann::json{{"kind", "dataset"}, {"name", to_string(manifest.dataset)}}.dump() << '\n';
  for (const auto& img : manifest.images)
    out << nlohmann::json{{"kind", "image"}, {"id", img.id}, {"uri", img.uri}}.dump() << '\n';
  for (const auto& q : manifest.queries) {
    nlohmann::json rec{
        {"kind", "query"}, {"id", q.id}, {"ref", q.ref_id}, {"text", q.text},
        {"targets", q.targets},
    };
    if (q.subset) rec["subset"] = *q.subset;
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed for manifest: " + path);
}

// ---------------------------------------------------------------------------
// Upstream adapters

namespace {

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("missing upstream file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("bad JSON in " + path + ": " + ex.what());
  }
  return j;
}

std::string require_string(const nlohmann::json& rec, const char* field, const std::string& where) {
  if (!rec.contains(field)) throw SchemaDrift("field \"" + std::string(field) + "\" absent in " + where);
  if (rec.at(field).is_number_integer())
    return std::to_string(rec.at(field).get<long long>());
  return rec.at(field).get<std::string>();
}

std::string first_existing(const std::vector<std::string>& candidates) {
  for (const auto& p : candidates)
    if (fs::exists(p)) return p;
  throw MissingFile("none of the expected upstream files exist, tried: " + candidates.front());
}

std::string strip_dot_slash(std::string p) {
  while (p.rfind("./", 0) == 0) p.erase(0, 2);
  return p;
}

// CIRR layout: captions/cap.rc2.<split>.json (array of records with pairid,
// reference, caption, img_set.members, and target_hard on splits with public
// ground truth) plus image_splits/split.rc2.<split>.json (img name -> path).
Manifest adapt_cirr(const std::string& raw) {
  const std::string cap_path = first_existing(
      {raw + "/captions/cap.rc2.test1.json", raw + "/captions/cap.rc2.val.json"});
  const bool test_split = cap_path.find("test1") != std::string::npos;
  const std::string split_path = raw + "/image_splits/split.rc2." +
                                 (test_split ? std::string("test1") : std::string("val")) +
                                 ".json";

  Manifest m;
  m.dataset = DatasetKind::cirr;

  const auto splits = load_json_file(split_path);
  if (!splits.is_object()) throw SchemaDrift("CIRR image split file is not an object");
  for (const auto& [name, rel] : splits.items())
    m.images.push_back({name, raw + "/" + strip_dot_slash(rel.get<std::string>())});

  const auto caps = load_json_file(cap_path);
  if (!caps.is_array()) throw SchemaDrift("CIRR caption file is not an array");
  for (const auto& rec : caps) {
    ManifestQuery q;
    q.id = require_string(rec, "pairid", cap_path);
    q.ref_id = require_string(rec, "reference", cap_path);
    q.text = require_string(rec, "caption", cap_path);
    if (rec.contains("target_hard")) q.targets.push_back(rec.at("target_hard").get<std::string>());
    if (!rec.contains("img_set") || !rec.at("img_set").contains("members"))
      throw SchemaDrift("field \"img_set.members\" absent in " + cap_path);
    q.subset = rec.at("img_set").at("members").get<std::vector<std::string>>();
    m.queries.push_back(std::move(q));
  }
  return m;
}

// CIRCO layout: annotations/<split>.json plus the COCO unlabeled2017 image
// index COCO2017_unlabeled/annotations/image_info_unlabeled2017.json.
Manifest adapt_circo(const std::string& raw) {
  const std::string ann_path =
      first_existing({raw + "/annotations/test.json", raw + "/annotations/val.json"});
  const std::string info_path = first_existing(
      {raw + "/COCO2017_unlabeled/annotations/image_info_unlabeled2017.json",
       raw + "/COCO2017_unlabeled/image_info_unlabeled2017.json"});

  Manifest m;
  m.dataset = DatasetKind::circo;

  const auto info = load_json_file(info_path);
  if (!info.contains("images")) throw SchemaDrift("field \"images\" absent in " + info_path);
  for (const auto& rec : info.at("images")) {
    const std::string id = require_string(rec, "id", info_path);
    const std::string file_name = require_string(rec, "file_name", info_path);
    m.images.push_back({id, raw + "/COCO2017_unlabeled/unlabeled2017/" + file_name});
  }

  const auto anns = load_json_file(ann_path);
  if (!anns.is_array()) throw SchemaDrift("CIRCO annotation file is not an array");
  std::size_t index = 0;
  for (const auto& rec : anns) {
    ManifestQuery q;
    q.id = rec.contains("id") ? require_string(rec, "id", ann_path) : std::to_string(index);
    q.ref_id = require_string(rec, "reference_img_id", ann_path);
    q.text = require_string(rec, "relative_caption", ann_path);
    if (rec.contains("gt_img_ids")) {
      for (const auto& g : rec.at("gt_img_ids")) {
        if (g.is_number_integer())
          q.targets.push_back(std::to_string(g.get<long long>()));
        else
          q.targets.push_back(g.get<std::string>());
      }
    } else if (rec.contains("target_img_id")) {
      q.targets.push_back(require_string(rec, "target_img_id", ann_path));
    }
    m.queries.push_back(std::move(q));
    ++index;
  }
  return m;
}

// FashionIQ layout: captions/cap.<category>.val.json (records with candidate,
// target, captions[2]) plus image_splits/split.<category>.val.json (array of
// image names). The two crowd captions of a query are joined with " and ".
Manifest adapt_fashioniq(const std::string& raw, const std::string& category, DatasetKind kind) {
  const std::string cap_path = raw + "/captions/cap." + category + ".val.json";
  const std::string split_path = raw + "/image_splits/split." + category + ".val.json";
  if (!fs::exists(cap_path)) throw MissingFile("missing upstream file: " + cap_path);

  Manifest m;
  m.dataset = kind;

  const auto splits = load_json_file(split_path);
  if (!splits.is_array()) throw SchemaDrift("FashionIQ split file is not an array");
  for (const auto& name : splits) {
    const std::string id = name.get<std::string>();
    m.images.push_back({id, raw + "/images/" + id + ".jpg"});
  }

  const auto caps = load_json_file(cap_path);
  if (!caps.is_array()) throw SchemaDrift("FashionIQ caption file is not an array");
  std::size_t index = 0;
  for (const auto& rec : caps) {
    ManifestQuery q;
    std::ostringstream id;
    id << category << "-val-" << std::setw(5) << std::setfill('0') << index;
    q.id = id.str();
    q.ref_id = require_string(rec, "candidate", cap_path);
    q.targets.push_back(require_string(rec, "target", cap_path));
    if (!rec.contains("captions")) throw SchemaDrift("field \"captions\" absent in " + cap_path);
    std::string joined;
    for (const auto& c : rec.at("captions")) {
      const std::string part = trim(c.get<std::string>());
      if (part.empty()) continue;
      if (!joined.empty()) joined += " and ";
      joined += part;
    }
    if (joined.empty())
      throw SchemaDrift("query " + q.id + " has no usable captions in " + cap_path);
    q.text = joined;
    m.queries.push_back(std::move(q));
    ++index;
  }
  return m;
}

}  // namespace

void adapt_upstream(DatasetKind kind, const std::string& raw_dir, const std::string& out_path) {
  if (!fs::exists(raw_dir)) throw MissingFile("raw directory does not exist: " + raw_dir);
  Manifest m;
  switch (kind) {
    case DatasetKind::cirr: m = adapt_cirr(raw_dir); break;
    case DatasetKind::circo: m = adapt_circo(raw_dir); break;
    case DatasetKind::fashioniq_shirt:
      m = adapt_fashioniq(raw_dir, "shirt", DatasetKind::fashioniq_shirt);
      break;
    case DatasetKind::fashioniq_dress:
      m = adapt_fashioniq(raw_dir, "dress", DatasetKind::fashioniq_dress);
      break;
    case DatasetKind::fashioniq_toptee:
      m = adapt_fashioniq(raw_dir, "toptee", DatasetKind::fashioniq_toptee);
      break;
    case DatasetKind::custom:
      throw InputError("custom datasets are authored directly as manifests");
  }
  save_manifest(m, out_path);
}

}  // namespace xr
