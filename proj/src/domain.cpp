#include "xr/domain.hpp"

#include <fstream>

#include <json.hpp>

#include "xr/errors.hpp"
#include "xr/text.hpp"

namespace xr {

PipelineConfig validate_config(const PipelineConfig& cfg) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
    throw ConfigError("lambda outside [0,1]: " + std::to_string(cfg.lambda));
  if (!(cfg.z > 0.0)) throw ConfigError("z must be positive: " + std::to_string(cfg.z));
  if (cfg.k < 1) throw ConfigError("k must be positive");
  if (cfg.k_prime < 1) throw ConfigError("k_prime must be positive");
  if (cfg.k > cfg.k_prime) throw ConfigError("k exceeds k_prime");
  if (cfg.n_questions < 1) throw ConfigError("n_questions must be positive");
  if (cfg.temperature < 0.0) throw ConfigError("temperature must be non-negative");
  if (!(cfg.top_p > 0.0) || cfg.top_p > 1.0)
    throw ConfigError("top_p outside (0,1]: " + std::to_string(cfg.top_p));
  if (cfg.max_inflight < 1) throw ConfigError("max_inflight must be positive");
  return cfg;
}

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "rrf") return FusionMode::rrf;
  if (name == "sum") return FusionMode::sum;
  throw ConfigError("unknown fusion mode: " + name);
}

VerifyMode parse_verify_mode(const std::string& name) {
  if (name == "independent") return VerifyMode::independent_sum;
  if (name == "conjunctive") return VerifyMode::conjunctive;
  throw ConfigError("unknown verify mode: " + name);
}

std::string to_string(FusionMode m) { return m == FusionMode::rrf ? "rrf" : "sum"; }

std::string to_string(VerifyMode m) {
  return m == VerifyMode::independent_sum ? "independent" : "conjunctive";
}

PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("bad config file " + path + ": " + ex.what());
  }
  if (!j.is_object()) throw FormatError("config file must hold a JSON object: " + path);

  PipelineConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "lambda")
      cfg.lambda = value.get<double>();
    else if (key == "z")
      cfg.z = value.get<double>();
    else if (key == "k")
      cfg.k = value.get<std::size_t>();
    else if (key == "k_prime")
      cfg.k_prime = value.get<std::size_t>();
    else if (key == "n_questions")
      cfg.n_questions = value.get<std::size_t>();
    else if (key == "temperature")
      cfg.temperature = value.get<double>();
    else if (key == "top_p")
      cfg.top_p = value.get<double>();
    else if (key == "max_inflight")
      cfg.max_inflight = value.get<std::size_t>();
    else if (key == "fusion")
      cfg.fusion = parse_fusion_mode(value.get<std::string>());
    else if (key == "verify_mode")
      cfg.verify_mode = parse_verify_mode(value.get<std::string>());
    else
      throw ConfigError("unknown config key: " + key);
  }
  return cfg;
}

Query make_query(std::string query_id, ImageHandle reference, std::string modification_text) {
  if (query_id.empty()) throw InputError("query_id is empty");
  if (reference.id.empty() || reference.uri.empty())
    throw InputError("reference image handle incomplete for query " + query_id);
  if (trim(modification_text).empty())
    throw InputError("modification_text is empty for query " + query_id);
  return Query{std::move(query_id), std::move(reference), std::move(modification_text)};
}

}  // namespace xr
