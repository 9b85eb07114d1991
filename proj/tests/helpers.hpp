#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "xr/agents.hpp"

namespace xr::test {

inline std::filesystem::path make_temp_dir(const std::string& prefix) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             (prefix + "_" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

// Accumulates mock script records and writes the ldJSON scenario file.
class ScriptBuilder {
 public:
  ScriptBuilder& chat(AgentKind kind, std::vector<std::string> inputs, std::string response) {
    records_.push_back({{"kind", to_string(kind)}, {"inputs", inputs}, {"response", response}});
    return *this;
  }
  ScriptBuilder& embed_text(const std::string& text, const std::vector<double>& raw) {
    records_.push_back(
        {{"kind", "embed_text"}, {"inputs", {text}}, {"response", nlohmann::json(raw).dump()}});
    return *this;
  }
  ScriptBuilder& embed_image(const std::string& id, const std::vector<double>& raw) {
    records_.push_back(
        {{"kind", "embed_image"}, {"inputs", {id}}, {"response", nlohmann::json(raw).dump()}});
    return *this;
  }
  ScriptBuilder& raw(nlohmann::json record) {
    records_.push_back(std::move(record));
    return *this;
  }

  std::string write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    for (const auto& rec : records_) out << rec.dump() << '\n';
    return path.string();
  }

 private:
  std::vector<nlohmann::json> records_;
};

struct MockRig {
  std::shared_ptr<MockBackend> backend;
  std::shared_ptr<ResponseCache> cache;
  std::unique_ptr<AgentService> service;
};

inline MockRig make_rig(const std::string& script_path, DecodeParams decode = {}) {
  MockRig rig;
  rig.backend = std::make_shared<MockBackend>(script_path);
  rig.cache = std::make_shared<ResponseCache>();
  rig.service = std::make_unique<AgentService>(rig.backend, decode, rig.cache);
  return rig;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace xr::test
