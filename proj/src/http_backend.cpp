#include "xr/http_backend.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "xr/errors.hpp"
#include "xr/text.hpp"

namespace xr {

namespace {

const char* kDefaultTemplates[] = {
    // caption
    "Describe the attached image in one concise sentence. Reply with the caption only.",
    // text_imagination
    "A reference image is described as: {c_r}\n"
    "The user wants this modification: {t_m}\n"
    "First list the explicit edits needed to reach the target image, one per line.\n"
    "Then write a line containing exactly ---\n"
    "Then write one caption describing the modified target image.",
    // vision_imagination
    "The attached image is the reference. The user wants this modification: {t_m}\n"
    "First list visual attributes of the target image, one per line, formatted as\n"
    "attribute: present or attribute: absent.\n"
    "Then write a line containing exactly ---\n"
    "Then write one caption describing the modified target image, grounded in what you see.",
    // question_gen
    "Modification request: {t_m}\n"
    "Explicit edits:\n{m_t}\n"
    "Visual attribute indicators:\n{m_v}\n"
    "Write exactly {n} True/False verification statements about the target image,\n"
    "one per line, formatted as: statement :: true or statement :: false.\n"
    "The expected answer describes the ideal target image.",
    // text_verifier
    "Caption: {caption}\n"
    "Statement: {question}\n"
    "Does the caption satisfy the statement? Reply with exactly one word: true or false.",
    // vision_verifier
    "Statement: {question}\n"
    "Does the attached image satisfy the statement? Reply with exactly one word: true or false.",
};

void replace_all(std::string& text, const std::string& what, const std::string& with) {
  std::size_t pos = 0;
  while ((pos = text.find(what, pos)) != std::string::npos) {
    text.replace(pos, what.size(), with);
    pos += with.size();
  }
}

// Splits "http://host:port/some/path" into client base and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status >= 500; }

}  // namespace

HttpBackendOptions HttpBackendOptions::from_env() {
  HttpBackendOptions opts;
  if (const char* v = std::getenv("XR_CHAT_URL")) opts.chat_url = v;
  if (const char* v = std::getenv("XR_EMBED_URL")) opts.embed_url = v;
  if (const char* v = std::getenv("XR_API_KEY")) opts.api_key = v;
  return opts;
}

void InflightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void InflightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

HttpBackend::HttpBackend(HttpBackendOptions opts)
    : opts_(std::move(opts)), limiter_(opts_.max_inflight == 0 ? 1 : opts_.max_inflight) {
  if (opts_.chat_url.empty()) throw ConfigError("live backend requires XR_CHAT_URL");
  if (opts_.embed_url.empty()) throw ConfigError("live backend requires XR_EMBED_URL");

  static const AgentKind kinds[] = {
      AgentKind::caption,        AgentKind::text_imagination, AgentKind::vision_imagination,
      AgentKind::question_gen,   AgentKind::text_verifier,    AgentKind::vision_verifier,
  };
  std::string prompt_blob;
  for (std::size_t i = 0; i < 6; ++i) {
    std::string tpl = kDefaultTemplates[i];
    if (!opts_.prompt_dir.empty()) {
      std::ifstream in(opts_.prompt_dir + "/" + to_string(kinds[i]) + ".txt");
      if (in) {
        std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (!trim(file).empty()) tpl = file;
      }
    }
    templates_[kinds[i]] = tpl;
    prompt_blob += tpl;
    prompt_blob += '\x1e';
  }

  embedder_identity_ = opts_.embed_model + "@" + opts_.embed_url;
  identity_ = "live:" + opts_.chat_model + "@" + opts_.chat_url + "|" + embedder_identity_ +
              "|prompts:" + fnv1a64_hex(prompt_blob);
}

std::string HttpBackend::render_prompt(const AgentRequest& request) const {
  std::string tpl = templates_.at(request.kind);
  const auto& texts = request.text_inputs;
  switch (request.kind) {
    case AgentKind::caption:
      break;
    case AgentKind::text_imagination:
      replace_all(tpl, "{t_m}", texts[0]);
      replace_all(tpl, "{c_r}", texts[1]);
      break;
    case AgentKind::vision_imagination:
      replace_all(tpl, "{t_m}", texts[0]);
      break;
    case AgentKind::question_gen:
      replace_all(tpl, "{t_m}", texts[0]);
      replace_all(tpl, "{m_t}", texts[1]);
      replace_all(tpl, "{m_v}", texts[2]);
      replace_all(tpl, "{n}", texts[3]);
      break;
    case AgentKind::text_verifier:
      replace_all(tpl, "{caption}", texts[0]);
      replace_all(tpl, "{question}", texts[1]);
      break;
    case AgentKind::vision_verifier:
      replace_all(tpl, "{question}", texts[0]);
      break;
  }
  return tpl;
}

std::string HttpBackend::post_json(const std::string& url, const std::string& body) {
  auto [base, path] = split_url(url);

  limiter_.acquire();
  struct Release {
    InflightLimiter* l;
    ~Release() { l->release(); }
  } releaser{&limiter_};

  std::string last_error;
  for (std::size_t attempt = 0; attempt < opts_.max_attempts; ++attempt) {
    if (attempt > 0) {
      auto delay = opts_.backoff_base * (1u << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(base);
    client.set_connection_timeout(opts_.timeout);
    client.set_read_timeout(opts_.timeout);
    httplib::Headers headers;
    if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);

    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    if (retryable_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + url + ": " +
                       res->body.substr(0, 200));
  }
  throw BackendError("request to " + url + " failed after " + std::to_string(opts_.max_attempts) +
                     " attempts (" + last_error + ")");
}

std::string HttpBackend::chat(const AgentRequest& request) {
  calls_.fetch_add(1);

  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", render_prompt(request)}});
  for (const auto& img : request.image_inputs)
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", img.uri}}}});

  nlohmann::json payload{
      {"model", opts_.chat_model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
      {"temperature", request.decode.temperature},
      {"top_p", request.decode.top_p},
  };

  const std::string body = post_json(opts_.chat_url, payload.dump());
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("chat endpoint returned invalid JSON: " + std::string(ex.what()));
  }
  if (!reply.contains("choices") || reply.at("choices").empty())
    throw EmptyResponse("chat endpoint returned no choices");
  const auto& message = reply.at("choices").at(0).at("message");
  const auto& text = message.at("content");
  if (text.is_string()) return text.get<std::string>();
  if (text.is_array()) {
    std::string joined;
    for (const auto& part : text)
      if (part.contains("text")) joined += part.at("text").get<std::string>();
    return joined;
  }
  throw ParseError("chat endpoint returned an unexpected content shape");
}

std::vector<float> HttpBackend::embed(EmbedKind, const std::string&, const std::string& payload) {
  calls_.fetch_add(1);

  nlohmann::json request{{"model", opts_.embed_model}, {"input", payload}};
  const std::string body = post_json(opts_.embed_url, request.dump());
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("embedding endpoint returned invalid JSON: " + std::string(ex.what()));
  }
  if (!reply.contains("data") || reply.at("data").empty())
    throw EmptyResponse("embedding endpoint returned no data");
  const auto& arr = reply.at("data").at(0).at("embedding");
  if (!arr.is_array() || arr.empty())
    throw ParseError("embedding endpoint returned a malformed vector");
  std::vector<float> vec;
  vec.reserve(arr.size());
  for (const auto& v : arr) vec.push_back(v.get<float>());
  return vec;
}

}  // namespace xr
