#include "xr/agents.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "xr/errors.hpp"
#include "xr/text.hpp"

namespace xr {

const char* to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::caption: return "caption";
    case AgentKind::text_imagination: return "text_imagination";
    case AgentKind::vision_imagination: return "vision_imagination";
    case AgentKind::question_gen: return "question_gen";
    case AgentKind::text_verifier: return "text_verifier";
    case AgentKind::vision_verifier: return "vision_verifier";
  }
  return "unknown";
}

AgentKind agent_kind_from_string(const std::string& name) {
  if (name == "caption") return AgentKind::caption;
  if (name == "text_imagination") return AgentKind::text_imagination;
  if (name == "vision_imagination") return AgentKind::vision_imagination;
  if (name == "question_gen") return AgentKind::question_gen;
  if (name == "text_verifier") return AgentKind::text_verifier;
  if (name == "vision_verifier") return AgentKind::vision_verifier;
  throw InputError("unknown agent kind: " + name);
}

namespace {

struct Arity {
  std::size_t texts;
  std::size_t images;
};

Arity arity_of(AgentKind kind) {
  switch (kind) {
    case AgentKind::caption: return {0, 1};
    case AgentKind::text_imagination: return {2, 0};
    case AgentKind::vision_imagination: return {1, 1};
    case AgentKind::question_gen: return {4, 0};
    case AgentKind::text_verifier: return {2, 0};
    case AgentKind::vision_verifier: return {1, 1};
  }
  return {0, 0};
}

}  // namespace

AgentRequest AgentRequest::make(AgentKind kind, std::vector<std::string> texts,
                                std::vector<ImageHandle> images, DecodeParams decode) {
  const Arity want = arity_of(kind);
  if (texts.size() != want.texts || images.size() != want.images) {
    std::ostringstream msg;
    msg << "agent " << to_string(kind) << " expects " << want.texts << " text and " << want.images
        << " image inputs, got " << texts.size() << "/" << images.size();
    throw InputError(msg.str());
  }
  for (const auto& t : texts) {
    if (trim(t).empty() && kind != AgentKind::question_gen)
      throw InputError(std::string("empty text input for agent ") + to_string(kind));
  }
  for (const auto& img : images) {
    if (img.id.empty()) throw InputError("image input without id");
  }
  return AgentRequest{kind, std::move(texts), std::move(images), decode};
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view data) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::vector<std::string> canonical_inputs(const AgentRequest& request) {
  std::vector<std::string> inputs = request.text_inputs;
  for (const auto& img : request.image_inputs) inputs.push_back(img.id);
  return inputs;
}

std::string inputs_hash(const std::vector<std::string>& inputs) {
  std::string joined;
  for (const auto& s : inputs) {
    joined += s;
    joined += '\x1e';
  }
  return fnv1a64_hex(joined);
}

std::string fingerprint(AgentKind kind, const std::vector<std::string>& inputs) {
  return std::string(to_string(kind)) + ":" + inputs_hash(inputs);
}

std::string fingerprint(EmbedKind kind, const std::string& input_key) {
  return std::string(kind == EmbedKind::text ? "embed_text" : "embed_image") + ":" +
         inputs_hash({input_key});
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(const std::string& script_path) {
  std::ifstream in(script_path);
  if (!in) throw IoError("cannot open mock script: " + script_path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  identity_ = "mock:" + fnv1a64_hex(content);

  std::istringstream lines(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError("mock script " + script_path + " line " + std::to_string(line_no) + ": " +
                        ex.what());
    }
    if (!rec.contains("kind") || !rec.contains("response"))
      throw FormatError("mock script line " + std::to_string(line_no) +
                        ": record needs kind and response");
    const std::string kind = rec.at("kind").get<std::string>();
    std::string hash;
    if (rec.contains("inputs_hash")) {
      hash = rec.at("inputs_hash").get<std::string>();
    } else if (rec.contains("inputs")) {
      hash = inputs_hash(rec.at("inputs").get<std::vector<std::string>>());
    } else {
      throw FormatError("mock script line " + std::to_string(line_no) +
                        ": record needs inputs_hash or inputs");
    }
    const std::string key = kind + ":" + hash;
    const std::string response = rec.at("response").get<std::string>();
    auto [it, inserted] = responses_.emplace(key, response);
    if (!inserted && it->second != response)
      throw FormatError("mock script line " + std::to_string(line_no) +
                        ": conflicting responses for fingerprint " + key);
  }
}

void MockBackend::set_noise(double sigma, std::uint64_t seed) {
  noise_sigma_ = sigma;
  noise_seed_ = seed;
  if (sigma != 0.0)
    identity_ += "+noise:" + std::to_string(sigma) + "@" + std::to_string(seed);
}

const std::string& MockBackend::lookup(const std::string& fp) const {
  auto it = responses_.find(fp);
  if (it == responses_.end())
    throw MockScriptError("mock script has no response for fingerprint " + fp);
  return it->second;
}

std::string MockBackend::chat(const AgentRequest& request) {
  calls_.fetch_add(1);
  return lookup(fingerprint(request.kind, canonical_inputs(request)));
}

std::vector<float> MockBackend::embed(EmbedKind kind, const std::string& input_key,
                                      const std::string&) {
  calls_.fetch_add(1);
  const std::string fp = fingerprint(kind, input_key);
  const std::string& raw = lookup(fp);
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("scripted embedding is not a JSON array: " + std::string(ex.what()));
  }
  if (!arr.is_array() || arr.empty()) throw ParseError("scripted embedding must be a non-empty array");
  std::vector<float> vec;
  vec.reserve(arr.size());
  for (const auto& v : arr) vec.push_back(v.get<float>());

  if (noise_sigma_ != 0.0) {
    std::mt19937_64 rng(noise_seed_ ^ fnv1a64(fp));
    std::normal_distribution<float> gauss(0.0f, static_cast<float>(noise_sigma_));
    for (auto& x : vec) x += gauss(rng);
  }
  return vec;
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(const std::string& file_path) : path_(file_path) {
  std::ifstream in(path_);
  if (in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& ex) {
        throw FormatError("cache file " + path_ + " line " + std::to_string(line_no) + ": " +
                          ex.what());
      }
      const std::string key = rec.at("k").get<std::string>();
      if (rec.contains("t"))
        text_[key] = rec.at("t").get<std::string>();
      else if (rec.contains("v"))
        vec_[key] = rec.at("v").get<std::vector<float>>();
    }
  }
}

ResponseCache::~ResponseCache() = default;

std::optional<std::string> ResponseCache::get_text(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = text_.find(key);
  if (it == text_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put_text(const std::string& key, const std::string& value) {
  {
    std::unique_lock lock(mu_);
    auto [it, inserted] = text_.emplace(key, value);
    if (!inserted) return;
  }
  if (!path_.empty()) {
    nlohmann::json rec{{"k", key}, {"t", value}};
    append_record(rec.dump());
  }
}

std::optional<std::vector<float>> ResponseCache::get_vec(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = vec_.find(key);
  if (it == vec_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put_vec(const std::string& key, const std::vector<float>& value) {
  {
    std::unique_lock lock(mu_);
    auto [it, inserted] = vec_.emplace(key, value);
    if (!inserted) return;
  }
  if (!path_.empty()) {
    nlohmann::json rec{{"k", key}, {"v", value}};
    append_record(rec.dump());
  }
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mu_);
  return text_.size() + vec_.size();
}

void ResponseCache::append_record(const std::string& line) {
  std::lock_guard lock(write_mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to cache file: " + path_);
  out << line << '\n';
}

// ---------------------------------------------------------------------------
// Reply parsing

TwoBlockReply parse_two_block(const std::string& reply) {
  const auto lines = split_lines(reply);
  std::size_t delim = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]) == "---") {
      delim = i;
      break;
    }
  }
  if (delim == lines.size())
    throw ParseError("imagination reply missing '---' delimiter line");

  TwoBlockReply out;
  for (std::size_t i = 0; i < delim; ++i) {
    auto t = trim(lines[i]);
    if (!t.empty()) out.list_lines.push_back(std::move(t));
  }
  std::string caption;
  for (std::size_t i = delim + 1; i < lines.size(); ++i) {
    auto t = trim(lines[i]);
    if (t.empty()) continue;
    if (!caption.empty()) caption += ' ';
    caption += t;
  }
  if (caption.empty()) throw ParseError("imagination reply has an empty caption block");
  out.caption_text = std::move(caption);
  return out;
}

std::vector<AttributeFlag> parse_attribute_lines(const std::vector<std::string>& lines) {
  std::vector<AttributeFlag> flags;
  flags.reserve(lines.size());
  for (const auto& line : lines) {
    auto colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError("attribute line without ':' separator: " + line);
    std::string name = trim(line.substr(0, colon));
    std::string value = to_lower(trim(line.substr(colon + 1)));
    if (name.empty()) throw ParseError("attribute line with empty name: " + line);
    if (value == "present")
      flags.push_back({name, true});
    else if (value == "absent")
      flags.push_back({name, false});
    else
      throw ParseError("attribute value must be present/absent: " + line);
  }
  return flags;
}

std::vector<std::pair<std::string, bool>> parse_question_lines(const std::string& reply) {
  std::vector<std::pair<std::string, bool>> pairs;
  for (const auto& line : split_lines(reply)) {
    auto sep = line.find("::");
    if (sep == std::string::npos) continue;
    std::string statement = trim(line.substr(0, sep));
    std::string answer = normalized_first_token(line.substr(sep + 2));
    if (statement.empty()) continue;
    if (answer == "true")
      pairs.emplace_back(std::move(statement), true);
    else if (answer == "false")
      pairs.emplace_back(std::move(statement), false);
  }
  return pairs;
}

std::string join_edits(const std::vector<std::string>& m_t) {
  std::string out;
  for (const auto& e : m_t) {
    if (!out.empty()) out += '\n';
    out += e;
  }
  return out;
}

std::string join_attributes(const std::vector<AttributeFlag>& m_v) {
  std::string out;
  for (const auto& a : m_v) {
    if (!out.empty()) out += '\n';
    out += a.attribute;
    out += '=';
    out += a.present ? "present" : "absent";
  }
  return out;
}

// ---------------------------------------------------------------------------
// AgentService

AgentService::AgentService(std::shared_ptr<Backend> backend, DecodeParams decode,
                           std::shared_ptr<ResponseCache> cache, AgentServiceOptions opts)
    : backend_(std::move(backend)), cache_(std::move(cache)), decode_(decode), opts_(opts) {
  if (!backend_) throw InputError("AgentService requires a backend");
  if (!cache_) cache_ = std::make_shared<ResponseCache>();
}

std::string AgentService::fetch(const AgentRequest& request, bool bypass_cache, bool* from_cache) {
  const std::string key =
      backend_->identity() + "|" + fingerprint(request.kind, canonical_inputs(request));
  if (!bypass_cache) {
    if (auto hit = cache_->get_text(key)) {
      if (from_cache) *from_cache = true;
      return *hit;
    }
  }
  if (from_cache) *from_cache = false;
  return backend_->chat(request);
}

void AgentService::store(const AgentRequest& request, const std::string& response) {
  const std::string key =
      backend_->identity() + "|" + fingerprint(request.kind, canonical_inputs(request));
  cache_->put_text(key, response);
}

Caption AgentService::caption(const ImageHandle& image, CaptionSource source) {
  auto request = AgentRequest::make(AgentKind::caption, {}, {image}, decode_);
  const std::string reply = fetch(request, false, nullptr);
  const std::string text = trim(reply);
  if (text.empty()) throw EmptyResponse("caption agent returned an empty reply for " + image.id);
  store(request, reply);
  return Caption{text, source};
}

std::pair<std::vector<std::string>, Caption> AgentService::imagine_text(const std::string& t_m,
                                                                        const Caption& c_r) {
  if (trim(t_m).empty()) throw InputError("imagine_text: modification text is empty");
  if (trim(c_r.text).empty()) throw InputError("imagine_text: reference caption is empty");
  auto request = AgentRequest::make(AgentKind::text_imagination, {t_m, c_r.text}, {}, decode_);
  const std::string reply = fetch(request, false, nullptr);
  TwoBlockReply parsed = parse_two_block(reply);
  if (parsed.list_lines.empty())
    throw ParseError("text imagination reply lists no edits");
  store(request, reply);
  return {parsed.list_lines, Caption{parsed.caption_text, CaptionSource::text_imagination}};
}

std::pair<std::vector<AttributeFlag>, Caption> AgentService::imagine_vision(
    const std::string& t_m, const ImageHandle& i_r) {
  if (trim(t_m).empty()) throw InputError("imagine_vision: modification text is empty");
  auto request = AgentRequest::make(AgentKind::vision_imagination, {t_m}, {i_r}, decode_);
  const std::string reply = fetch(request, false, nullptr);
  TwoBlockReply parsed = parse_two_block(reply);
  auto flags = parse_attribute_lines(parsed.list_lines);
  store(request, reply);
  return {std::move(flags), Caption{parsed.caption_text, CaptionSource::vision_imagination}};
}

QuestionSet AgentService::generate_questions(const std::vector<std::string>& m_t,
                                             const std::vector<AttributeFlag>& m_v,
                                             const std::string& t_m, std::size_t n) {
  if (n < 1) throw InputError("generate_questions: n must be at least 1");
  auto request = AgentRequest::make(
      AgentKind::question_gen, {t_m, join_edits(m_t), join_attributes(m_v), std::to_string(n)},
      {}, decode_);

  std::size_t last_count = 0;
  for (std::size_t attempt = 0; attempt <= opts_.max_reprompts; ++attempt) {
    bool from_cache = false;
    const std::string reply = fetch(request, attempt > 0, &from_cache);
    auto pairs = parse_question_lines(reply);
    last_count = pairs.size();
    if (pairs.size() >= n) {
      QuestionSet qs;
      qs.questions.reserve(n);
      qs.expected.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        qs.questions.push_back(std::move(pairs[i].first));
        qs.expected.push_back(pairs[i].second);
      }
      if (!from_cache) store(request, reply);
      return qs;
    }
  }
  throw SchemaError("question agent produced " + std::to_string(last_count) +
                    " parseable pairs, need " + std::to_string(n) + " after " +
                    std::to_string(opts_.max_reprompts) + " re-prompts");
}

bool AgentService::parse_verdict(const std::string& reply) const {
  const std::string tok = normalized_first_token(reply);
  if (tok == "true") return true;
  if (tok == "false") return false;
  std::string snippet = reply.substr(0, 40);
  throw UnparsableVerdict("verdict reply is neither true nor false: \"" + snippet + "\"");
}

bool AgentService::answer_question_text(const Caption& c_a, const std::string& question) {
  if (trim(c_a.text).empty() || trim(question).empty())
    throw InputError("answer_question_text: empty input");
  auto request = AgentRequest::make(AgentKind::text_verifier, {c_a.text, question}, {}, decode_);
  const std::string reply = fetch(request, false, nullptr);
  bool verdict;
  try {
    verdict = parse_verdict(reply);
  } catch (const UnparsableVerdict&) {
    unparsable_verdicts_.fetch_add(1);
    throw;
  }
  store(request, reply);
  return verdict;
}

bool AgentService::answer_question_vision(const ImageHandle& i_a, const std::string& question) {
  if (trim(question).empty()) throw InputError("answer_question_vision: empty question");
  auto request = AgentRequest::make(AgentKind::vision_verifier, {question}, {i_a}, decode_);
  const std::string reply = fetch(request, false, nullptr);
  bool verdict;
  try {
    verdict = parse_verdict(reply);
  } catch (const UnparsableVerdict&) {
    unparsable_verdicts_.fetch_add(1);
    throw;
  }
  store(request, reply);
  return verdict;
}

std::vector<float> AgentService::embed(EmbedKind kind, const std::string& key,
                                       const std::string& payload) {
  const std::string cache_key = backend_->identity() + "|" + fingerprint(kind, key);
  std::vector<float> raw;
  if (auto hit = cache_->get_vec(cache_key)) {
    raw = std::move(*hit);
  } else {
    raw = backend_->embed(kind, key, payload);
    if (raw.empty()) throw EmptyResponse("embedding backend returned an empty vector");
    cache_->put_vec(cache_key, raw);
  }

  std::size_t expected = dim_.load();
  if (expected == 0) {
    dim_.store(raw.size());
  } else if (raw.size() != expected) {
    throw DimensionMismatch("embedding dimension changed mid-run: " + std::to_string(expected) +
                            " -> " + std::to_string(raw.size()));
  }

  double norm_sq = 0.0;
  for (float x : raw) norm_sq += static_cast<double>(x) * static_cast<double>(x);
  if (norm_sq == 0.0) throw EmptyResponse("embedding backend returned a zero vector");
  const double inv = 1.0 / std::sqrt(norm_sq);
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = static_cast<float>(static_cast<double>(raw[i]) * inv);
  return out;
}

std::vector<float> AgentService::embed_text(const std::string& text) {
  if (trim(text).empty()) throw InputError("embed_text: empty input");
  return embed(EmbedKind::text, text, text);
}

std::vector<float> AgentService::embed_image(const ImageHandle& image) {
  if (image.id.empty()) throw InputError("embed_image: image without id");
  return embed(EmbedKind::image, image.id, image.uri);
}

}  // namespace xr
