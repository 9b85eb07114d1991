#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xr/domain.hpp"
#include "xr/metrics.hpp"

namespace xr {

enum class DatasetKind {
  cirr,
  circo,
  fashioniq_shirt,
  fashioniq_dress,
  fashioniq_toptee,
  custom,
};

const char* to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& name);

struct ManifestQuery {
  std::string id;
  std::string ref_id;
  std::string text;
  std::vector<std::string> targets;  // may be empty for hidden-ground-truth splits
  std::optional<std::vector<std::string>> subset;
};

// Canonical benchmark manifest: the single ingestion surface behind the
// three upstream annotation schemas.
struct Manifest {
  DatasetKind dataset = DatasetKind::custom;
  std::vector<ImageHandle> images;
  std::vector<ManifestQuery> queries;

  std::map<std::string, GroundTruth> ground_truth() const;
};

// Line-delimited JSON; records {"kind":"image",...} and {"kind":"query",...},
// with an optional leading {"kind":"dataset","name":...} record.
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

// Converts a benchmark's published annotation layout into a canonical
// manifest file. Deterministic: same raw tree, byte-identical output.
void adapt_upstream(DatasetKind kind, const std::string& raw_dir, const std::string& out_path);

}  // namespace xr
