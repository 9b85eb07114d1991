#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "helpers.hpp"
#include "xr/errors.hpp"
#include "xr/http_backend.hpp"

using namespace xr;

namespace {

// Minimal local endpoint pair implementing the chat-completions shape.
struct LocalServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  std::atomic<int> chat_hits{0};
  std::atomic<int> fail_first_n{0};
  nlohmann::json last_chat_body;
  std::mutex body_mu;

  LocalServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      chat_hits.fetch_add(1);
      if (fail_first_n.fetch_sub(1) > 0) {
        res.status = 503;
        res.set_content("overloaded", "text/plain");
        return;
      }
      {
        std::lock_guard lock(body_mu);
        last_chat_body = nlohmann::json::parse(req.body);
      }
      nlohmann::json reply{
          {"choices",
           nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", "a tan dog"}}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
      nlohmann::json reply{{"data", nlohmann::json::array({{{"embedding", {3.0, 4.0}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    server.Post("/bad/chat", [](const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content("{\"error\":{\"message\":\"bad request\"}}", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~LocalServer() {
    server.stop();
    thread.join();
  }

  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port) + path;
  }
};

HttpBackendOptions fast_options(const LocalServer& srv) {
  HttpBackendOptions opts;
  opts.chat_url = srv.url("/v1/chat/completions");
  opts.embed_url = srv.url("/v1/embeddings");
  opts.api_key = "test-key";
  opts.backoff_base = std::chrono::milliseconds(1);
  opts.timeout = std::chrono::seconds(5);
  return opts;
}

}  // namespace

TEST_CASE("live backend speaks the chat-completions wire shape") {
  LocalServer srv;
  auto backend = std::make_shared<HttpBackend>(fast_options(srv));
  AgentService service(backend, DecodeParams{0.0, 1.0});

  Caption cap = service.caption({"dog_01", "http://images/dog_01.png"});
  CHECK(cap.text == "a tan dog");

  std::lock_guard lock(srv.body_mu);
  const auto& body = srv.last_chat_body;
  CHECK(body.at("model").is_string());
  CHECK(body.at("temperature").get<double>() == 0.0);
  CHECK(body.at("top_p").get<double>() == 1.0);
  const auto& content = body.at("messages").at(0).at("content");
  CHECK(content.at(0).at("type") == "text");
  CHECK(content.at(1).at("type") == "image_url");
  CHECK(content.at(1).at("image_url").at("url") == "http://images/dog_01.png");
}

TEST_CASE("transient 5xx failures are retried to success") {
  LocalServer srv;
  srv.fail_first_n = 2;
  auto backend = std::make_shared<HttpBackend>(fast_options(srv));
  AgentService service(backend, {});

  Caption cap = service.caption({"dog_01", "http://images/dog_01.png"});
  CHECK(cap.text == "a tan dog");  // indistinguishable from immediate success
  CHECK(srv.chat_hits.load() == 3);
  CHECK(backend->calls() == 1);  // one logical request
}

TEST_CASE("retry budget exhaustion raises BackendError") {
  LocalServer srv;
  srv.fail_first_n = 99;
  auto backend = std::make_shared<HttpBackend>(fast_options(srv));
  AgentService service(backend, {});
  CHECK_THROWS_AS(service.caption({"dog_01", "u"}), BackendError);
  CHECK(srv.chat_hits.load() == 3);  // default attempt budget
}

TEST_CASE("4xx responses are terminal") {
  LocalServer srv;
  auto opts = fast_options(srv);
  opts.chat_url = srv.url("/bad/chat");
  auto backend = std::make_shared<HttpBackend>(opts);
  AgentService service(backend, {});
  CHECK_THROWS_AS(service.caption({"dog_01", "u"}), BackendError);
}

TEST_CASE("unreachable endpoint fails after retries") {
  HttpBackendOptions opts;
  opts.chat_url = "http://127.0.0.1:1/v1/chat/completions";  // nothing listens here
  opts.embed_url = "http://127.0.0.1:1/v1/embeddings";
  opts.backoff_base = std::chrono::milliseconds(1);
  opts.timeout = std::chrono::seconds(1);
  auto backend = std::make_shared<HttpBackend>(opts);
  AgentService service(backend, {});
  CHECK_THROWS_AS(service.caption({"dog_01", "u"}), BackendError);
}

TEST_CASE("embedding endpoint responses are parsed and normalized") {
  LocalServer srv;
  auto backend = std::make_shared<HttpBackend>(fast_options(srv));
  AgentService service(backend, {});
  const auto v = service.embed_text("hello");
  REQUIRE(v.size() == 2);
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));
}

TEST_CASE("prompt templates substitute request inputs") {
  LocalServer srv;
  auto backend = std::make_shared<HttpBackend>(fast_options(srv));
  auto req = AgentRequest::make(AgentKind::text_verifier, {"a red car", "The car is red"}, {});
  const std::string prompt = backend->render_prompt(req);
  CHECK(prompt.find("a red car") != std::string::npos);
  CHECK(prompt.find("The car is red") != std::string::npos);
  CHECK(prompt.find("{caption}") == std::string::npos);
  CHECK(prompt.find("{question}") == std::string::npos);
}

TEST_CASE("missing endpoints are a config error") {
  HttpBackendOptions opts;
  CHECK_THROWS_AS(std::make_shared<HttpBackend>(opts), ConfigError);
}
