#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "xr/agents.hpp"

namespace xr {

struct HttpBackendOptions {
  std::string chat_url;
  std::string embed_url;
  std::string api_key;
  std::string chat_model = "internvl3-8b";
  std::string embed_model = "clip-vit-b-32";
  std::size_t max_inflight = 4;
  std::size_t max_attempts = 3;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::seconds timeout{120};
  std::string prompt_dir;  // empty = built-in templates

  // Reads XR_CHAT_URL, XR_EMBED_URL, XR_API_KEY.
  static HttpBackendOptions from_env();
};

// Counting semaphore bounding in-flight requests per backend.
class InflightLimiter {
 public:
  explicit InflightLimiter(std::size_t limit) : available_(limit) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t available_;
};

// Live backend speaking the chat-completions JSON shape over HTTP POST.
// 5xx and transport failures are retried with exponential backoff up to
// max_attempts; 4xx is terminal.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendOptions opts);

  std::string identity() const override { return identity_; }
  std::string embedder_identity() const override { return embedder_identity_; }
  std::string chat(const AgentRequest& request) override;
  std::vector<float> embed(EmbedKind kind, const std::string& input_key,
                           const std::string& payload) override;
  std::uint64_t calls() const override { return calls_.load(); }

  // Rendered prompt for a request; exposed for tests and trace dumps.
  std::string render_prompt(const AgentRequest& request) const;

 private:
  std::string post_json(const std::string& url, const std::string& body);

  HttpBackendOptions opts_;
  std::map<AgentKind, std::string> templates_;
  std::string identity_;
  std::string embedder_identity_;
  std::atomic<std::uint64_t> calls_{0};
  InflightLimiter limiter_;
};

}  // namespace xr
