#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <memory>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "clucert/embedding.hpp"
#include "clucert/model_client.hpp"

using namespace clucert;

namespace {

// In-process OpenAI-style endpoints for wire-format tests.
class LocalServer {
 public:
  LocalServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      ++chat_calls_;
      if (fail_next_ > 0) {
        --fail_next_;
        res.status = 500;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      last_model_ = body.at("model").get<std::string>();
      last_temperature_ = body.at("temperature").get<double>();
      last_prompt_ = body.at("messages").at(0).at("content").get<std::string>();
      nlohmann::json out;
      out["choices"] = nlohmann::json::array(
          {nlohmann::json{{"message", {{"role", "assistant"}, {"content", reply_}}}}});
      res.set_content(out.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req,
                                          httplib::Response& res) {
      ++embed_calls_;
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json data = nlohmann::json::array();
      for (const auto& input : body.at("input")) {
        const std::string text = input.get<std::string>();
        // toy 4-dim embedding derived from the text so tests can predict it
        nlohmann::json item;
        item["embedding"] = {static_cast<double>(text.size()), 1.0, 0.0, 0.0};
        data.push_back(item);
      }
      nlohmann::json out;
      out["data"] = data;
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::string reply_ = "positive";
  std::atomic<int> chat_calls_{0};
  std::atomic<int> embed_calls_{0};
  std::atomic<int> fail_next_{0};
  std::string last_model_, last_prompt_;
  double last_temperature_ = -1.0;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

HttpTransportConfig transport_config(const LocalServer& server) {
  HttpTransportConfig cfg;
  cfg.endpoint = server.url();
  cfg.model = "test-model";
  cfg.max_retries = 2;
  cfg.backoff_s = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("chat transport speaks the OpenAI-compatible wire format") {
  LocalServer server;
  HttpChatTransport transport(transport_config(server));
  const std::string reply = transport.complete("hello world");
  CHECK(reply == "positive");
  CHECK(server.last_prompt_ == "hello world");
  CHECK(server.last_model_ == "test-model");
  CHECK(server.last_temperature_ == 0.0);
}

TEST_CASE("chat transport retries transient failures with backoff") {
  LocalServer server;
  server.fail_next_ = 2;
  HttpChatTransport transport(transport_config(server));
  CHECK(transport.complete("try again") == "positive");
  CHECK(server.chat_calls_ == 3);

  server.fail_next_ = 10;  // more than the retry budget
  CHECK_THROWS_AS(transport.complete("always failing"), TransportError);
}

TEST_CASE("chat classifier against a live local endpoint with cache") {
  LocalServer server;
  HttpChatTransport transport(transport_config(server));
  QueryCache cache;  // in-memory
  ChatClassifier clf(make_task("sentiment2"), transport, &cache);

  const Sentence s({"what", "a", "good", "film"});
  CHECK(clf.classify(s) == "positive");
  CHECK(clf.classify(s) == "positive");
  CHECK(server.chat_calls_ == 1);  // second call served from the cache
  CHECK(clf.cache_hits() == 1);

  server.reply_ = "hard to say";
  CHECK(clf.classify(Sentence({"different", "input"})) == kOtherLabel);
}

TEST_CASE("remote embedder round-trips the documented request and response") {
  LocalServer server;
  RemoteEmbedderConfig cfg;
  cfg.endpoint = server.url();
  cfg.max_retries = 1;
  cfg.backoff_s = 0.01;
  RemoteEmbedder embedder(cfg);

  const auto v = embedder.embed(Sentence({"two", "words"}));
  REQUIRE(v.size() == 4);
  CHECK(v[0] == 9.0);  // "two words" has 9 characters
  CHECK(v[1] == 1.0);
  CHECK(embedder.dimension() == 4);

  const auto batch =
      embedder.embed_batch({Sentence({"a"}), Sentence({"bb", "cc"})});
  REQUIRE(batch.size() == 2);
  CHECK(batch[0][0] == 1.0);
  CHECK(batch[1][0] == 5.0);
  CHECK(server.embed_calls_ == 2);  // one call per request, batched second
}

TEST_CASE("remote embedder surfaces transport failures with retry metadata") {
  RemoteEmbedderConfig cfg;
  cfg.endpoint = "http://127.0.0.1:9";  // discard port: connection refused
  cfg.max_retries = 1;
  cfg.backoff_s = 0.01;
  cfg.timeout_s = 1;
  RemoteEmbedder embedder(cfg);
  try {
    embedder.embed(Sentence({"x"}));
    FAIL("expected EmbeddingError");
  } catch (const EmbeddingError& e) {
    CHECK(e.attempts == 2);
  }
}
