#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace xr {

// Handle to an image in a catalog or manifest. Pixel data never enters the
// engine; backends resolve the uri themselves.
struct ImageHandle {
  std::string id;
  std::string uri;
};

// One unit of retrieval work: a reference image plus a modification text.
struct Query {
  std::string query_id;
  ImageHandle reference;
  std::string modification_text;
};

enum class CaptionSource {
  candidate,
  reference,
  text_imagination,
  vision_imagination,
};

struct Caption {
  std::string text;
  CaptionSource source = CaptionSource::candidate;
};

// Presence/absence indicator for one visual attribute.
struct AttributeFlag {
  std::string attribute;
  bool present = false;

  bool operator==(const AttributeFlag&) const = default;
};

// Output of the imagination stage: two target-proxy captions plus the
// edit list and attribute set that later feed question generation.
struct ImaginationResult {
  Caption c_t;
  Caption c_v;
  std::vector<std::string> m_t;
  std::vector<AttributeFlag> m_v;
};

enum class FusionMode { rrf, sum };
enum class VerifyMode { independent_sum, conjunctive };

struct PipelineConfig {
  double lambda = 0.15;
  double z = 60.0;
  std::size_t k = 50;
  std::size_t k_prime = 100;
  std::size_t n_questions = 3;
  double temperature = 0.0;
  double top_p = 1.0;
  std::size_t max_inflight = 4;
  FusionMode fusion = FusionMode::rrf;
  VerifyMode verify_mode = VerifyMode::independent_sum;
};

// Checks every config invariant; returns the config unchanged when all hold,
// throws ConfigError naming the first violated one otherwise. Idempotent.
PipelineConfig validate_config(const PipelineConfig& cfg);

// Reads a JSON key-value config file; keys match PipelineConfig field names.
// Unknown keys are rejected. Missing keys keep their defaults.
PipelineConfig load_config_file(const std::string& path);

FusionMode parse_fusion_mode(const std::string& name);
VerifyMode parse_verify_mode(const std::string& name);
std::string to_string(FusionMode m);
std::string to_string(VerifyMode m);

// Validated Query constructor; rejects empty modification text.
Query make_query(std::string query_id, ImageHandle reference, std::string modification_text);

}  // namespace xr
