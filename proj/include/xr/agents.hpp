#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xr/domain.hpp"

namespace xr {

enum class AgentKind {
  caption,
  text_imagination,
  vision_imagination,
  question_gen,
  text_verifier,
  vision_verifier,
};

enum class EmbedKind { text, image };

const char* to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& name);

struct DecodeParams {
  double temperature = 0.0;
  double top_p = 1.0;
};

// Chat-style request routed to a backend. Construction enforces per-kind
// arity, so a malformed request never reaches the wire.
struct AgentRequest {
  AgentKind kind;
  std::vector<std::string> text_inputs;
  std::vector<ImageHandle> image_inputs;
  DecodeParams decode;

  static AgentRequest make(AgentKind kind, std::vector<std::string> texts,
                           std::vector<ImageHandle> images, DecodeParams decode = {});
};

// True/False verification questions with expected answers, same length.
struct QuestionSet {
  std::vector<std::string> questions;
  std::vector<bool> expected;

  std::size_t size() const { return questions.size(); }
};

std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

// Canonical text inputs of a request, the basis of script fingerprints and
// cache keys. Images contribute their id, never the uri.
std::vector<std::string> canonical_inputs(const AgentRequest& request);
std::string inputs_hash(const std::vector<std::string>& inputs);

// "<kind>:<inputs_hash>"
std::string fingerprint(AgentKind kind, const std::vector<std::string>& inputs);
std::string fingerprint(EmbedKind kind, const std::string& input_key);

class Backend {
 public:
  virtual ~Backend() = default;

  // Stable identity of the backend configuration; part of every cache key.
  virtual std::string identity() const = 0;
  // Identity of the embedding provider, recorded in catalog headers.
  virtual std::string embedder_identity() const = 0;

  virtual std::string chat(const AgentRequest& request) = 0;
  // Raw (un-normalized) embedding. input_key is the fingerprint input
  // (text or image id); payload is what a live endpoint receives (text or uri).
  virtual std::vector<float> embed(EmbedKind kind, const std::string& input_key,
                                   const std::string& payload) = 0;

  virtual std::uint64_t calls() const = 0;
};

// Deterministic scripted backend. The script is line-delimited JSON, one
// record per request: {"kind": ..., "inputs_hash": ..., "response": ...};
// records may carry "inputs": [...] instead of "inputs_hash", in which case
// the hash is computed on load. Unknown fingerprints raise MockScriptError —
// a scenario must be total over its test.
class MockBackend : public Backend {
 public:
  explicit MockBackend(const std::string& script_path);

  // Gaussian perturbation of scripted embeddings, keyed by (seed, request),
  // for multi-seed experiment series. sigma = 0 restores exact playback.
  void set_noise(double sigma, std::uint64_t seed);

  std::string identity() const override { return identity_; }
  std::string embedder_identity() const override { return identity_; }
  std::string chat(const AgentRequest& request) override;
  std::vector<float> embed(EmbedKind kind, const std::string& input_key,
                           const std::string& payload) override;
  std::uint64_t calls() const override { return calls_.load(); }

 private:
  const std::string& lookup(const std::string& fp) const;

  std::unordered_map<std::string, std::string> responses_;
  std::string identity_;
  std::atomic<std::uint64_t> calls_{0};
  double noise_sigma_ = 0.0;
  std::uint64_t noise_seed_ = 0;
};

// Response cache shared by all operations of a run: chat replies and raw
// embedding vectors, keyed by backend identity + request fingerprint.
// Optionally backed by an append-only ldJSON file so expensive catalog
// passes survive process restarts. Writes are serialized, reads concurrent.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(const std::string& file_path);
  ~ResponseCache();

  std::optional<std::string> get_text(const std::string& key) const;
  void put_text(const std::string& key, const std::string& value);
  std::optional<std::vector<float>> get_vec(const std::string& key) const;
  void put_vec(const std::string& key, const std::vector<float>& value);
  std::size_t size() const;

 private:
  void append_record(const std::string& line);

  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::string> text_;
  std::unordered_map<std::string, std::vector<float>> vec_;
  std::string path_;
  std::mutex write_mu_;
};

struct AgentServiceOptions {
  std::size_t max_reprompts = 2;
};

// The seven paper agents behind one facade. Parsing, normalization,
// question-count enforcement, and caching live here; transport and retry
// live in the Backend.
class AgentService {
 public:
  AgentService(std::shared_ptr<Backend> backend, DecodeParams decode,
               std::shared_ptr<ResponseCache> cache = nullptr, AgentServiceOptions opts = {});

  Caption caption(const ImageHandle& image, CaptionSource source = CaptionSource::candidate);
  std::pair<std::vector<std::string>, Caption> imagine_text(const std::string& t_m,
                                                            const Caption& c_r);
  std::pair<std::vector<AttributeFlag>, Caption> imagine_vision(const std::string& t_m,
                                                                const ImageHandle& i_r);
  QuestionSet generate_questions(const std::vector<std::string>& m_t,
                                 const std::vector<AttributeFlag>& m_v, const std::string& t_m,
                                 std::size_t n);
  bool answer_question_text(const Caption& c_a, const std::string& question);
  bool answer_question_vision(const ImageHandle& i_a, const std::string& question);
  std::vector<float> embed_text(const std::string& text);
  std::vector<float> embed_image(const ImageHandle& image);

  // Fixed once the first embedding of a run arrives; 0 before that.
  std::size_t embedding_dim() const { return dim_.load(); }
  Backend& backend() { return *backend_; }
  const Backend& backend() const { return *backend_; }
  std::uint64_t unparsable_verdicts() const { return unparsable_verdicts_.load(); }

 private:
  // Fetches through the cache; from_cache tells re-prompt logic whether a
  // fresh fetch is still possible.
  std::string fetch(const AgentRequest& request, bool bypass_cache, bool* from_cache);
  void store(const AgentRequest& request, const std::string& response);
  std::vector<float> embed(EmbedKind kind, const std::string& key, const std::string& payload);
  bool parse_verdict(const std::string& reply) const;

  std::shared_ptr<Backend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  DecodeParams decode_;
  AgentServiceOptions opts_;
  std::atomic<std::size_t> dim_{0};
  std::atomic<std::uint64_t> unparsable_verdicts_{0};
};

// Two-block reply layout shared by both imagination agents: a list block and
// a caption block separated by a line holding exactly "---".
struct TwoBlockReply {
  std::vector<std::string> list_lines;
  std::string caption_text;
};
TwoBlockReply parse_two_block(const std::string& reply);
std::vector<AttributeFlag> parse_attribute_lines(const std::vector<std::string>& lines);
// Parses "statement :: true|false" lines; unparseable lines are dropped.
std::vector<std::pair<std::string, bool>> parse_question_lines(const std::string& reply);

std::string join_edits(const std::vector<std::string>& m_t);
std::string join_attributes(const std::vector<AttributeFlag>& m_v);

}  // namespace xr
