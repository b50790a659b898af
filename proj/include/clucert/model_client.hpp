#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "clucert/embedding.hpp"
#include "clucert/text.hpp"

namespace clucert {

// Reserved pseudo-label for unparseable or failed classifier responses. It is
// tallied like any label but can never be certified, which keeps failure
// handling conservative: failures inflate the vote denominator.
inline constexpr const char* kOtherLabel = "OTHER";

// Pooled competitor key for open label namespaces (numeric answers): stands
// for every label never observed in the vote counts.
inline constexpr const char* kUnseenLabel = "_unseen_";

struct TaskSpec {
  std::string task_id;                 // sentiment2 | topic4 | math_numeric
  std::vector<std::string> label_set;  // empty for the open numeric namespace
  std::string instruction_text;
  enum class Extraction { KeywordSingle, LastNumber };
  Extraction extraction = Extraction::KeywordSingle;

  bool closed() const { return !label_set.empty(); }
};

// The three built-in tasks; throws on anything else.
TaskSpec make_task(const std::string& task_id);

struct PromptEnvelope {
  std::string instruction;
  std::string input_text;
  std::string rendered;  // byte-exact three-section template
};

PromptEnvelope render_prompt(const TaskSpec& task, const std::string& input_text);

// Total function into label-or-OTHER. Keyword tasks: exactly one label keyword
// present (case-insensitive) wins; zero or several yield OTHER. Numeric tasks:
// the last numeric literal, commas stripped and canonicalized.
std::string parse_response(const std::string& text, const TaskSpec& task);

// "1,234.50" -> "1234.5"; empty result when the text is not a number.
std::string canonical_numeric(const std::string& text);

struct TransportError : std::runtime_error {
  int attempts = 0;
  TransportError(const std::string& what, int attempts_)
      : std::runtime_error(what), attempts(attempts_) {}
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  // One completion at temperature 0; throws TransportError after the retry
  // budget is exhausted.
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string endpoint_id() const { return "local"; }
  virtual std::string model_name() const { return "none"; }
};

struct HttpTransportConfig {
  std::string endpoint;  // base URL
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;  // from CLUCERT_API_KEY
  int timeout_s = 60;
  int max_retries = 3;
  double backoff_s = 0.25;
  int max_in_flight = 4;
};

// OpenAI-compatible chat endpoint client.
class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(HttpTransportConfig config);
  ~HttpChatTransport() override;
  std::string complete(const std::string& prompt) override;
  std::string endpoint_id() const override;
  std::string model_name() const override;
  long calls() const { return calls_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<long> calls_{0};
};

// Append-only persistent response cache, JSONL of entries keyed by a digest of
// (endpoint, model, temperature, prompt). Digest collisions count as hits only
// after a full-field equality re-check.
class QueryCache {
 public:
  // Loads existing entries; appends new ones. Empty path = in-memory only.
  explicit QueryCache(std::string path = "");
  ~QueryCache();

  std::optional<std::string> get(const std::string& endpoint, const std::string& model,
                                 double temperature, const std::string& prompt);
  void put(const std::string& endpoint, const std::string& model, double temperature,
           const std::string& prompt, const std::string& response);
  size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Black-box base classifier interface. classify() is total: transport and
// parse failures come back as OTHER, with counters for accounting.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string classify(const Sentence& s) = 0;
  virtual std::string describe() const { return "classifier"; }
  virtual long transport_failures() const { return 0; }
};

class ChatClassifier final : public Classifier {
 public:
  ChatClassifier(TaskSpec task, ChatTransport& transport, QueryCache* cache = nullptr);
  std::string classify(const Sentence& s) override;
  std::string describe() const override;
  long transport_failures() const override { return failures_.load(); }
  long transport_calls() const { return transport_calls_.load(); }
  long cache_hits() const { return cache_hits_.load(); }

 private:
  TaskSpec task_;
  ChatTransport& transport_;
  QueryCache* cache_;
  std::atomic<long> failures_{0};
  std::atomic<long> transport_calls_{0};
  std::atomic<long> cache_hits_{0};
};

// Deterministic offline classifier keyed by a linear functional of the
// offline hash embedding: label_above iff dot(direction, embed(s)) >= threshold.
// lipschitz_constant() is the documented constant used by the variance checks;
// it is calibrated for cluster diameters >= 0.1 in the 64-dim embedding space.
class LipschitzSyntheticClassifier final : public Classifier {
 public:
  LipschitzSyntheticClassifier(uint64_t direction_seed, double threshold,
                               std::string label_above = "A",
                               std::string label_below = "B");
  std::string classify(const Sentence& s) override;
  std::string describe() const override;
  double lipschitz_constant() const { return 2.5; }
  double threshold() const { return threshold_; }
  // Direction projection of an embedding; exposed for the variance checks.
  double project(const EmbeddingVector& v) const;

 private:
  EmbeddingVector direction_;
  double threshold_;
  std::string label_above_, label_below_;
  OfflineHashEmbedder embedder_;
};

// Stub classifier factory. Rules:
//   constant:<label>
//   keyword:<token>:<label_if_present>:<label_else>
//   position:<index>:<token>:<label_if_equal>:<label_else>
//   lipschitz:<direction_seed>:<threshold>
std::unique_ptr<Classifier> make_stub_classifier(const std::string& rule);

// Always-throwing transport for failure-path tests.
class FailingTransport final : public ChatTransport {
 public:
  std::string complete(const std::string&) override {
    ++calls_;
    throw TransportError("stub transport failure", 1);
  }
  long calls() const { return calls_; }

 private:
  long calls_ = 0;
};

// Fixed-response transport for tests.
class FixedTransport final : public ChatTransport {
 public:
  explicit FixedTransport(std::string response) : response_(std::move(response)) {}
  std::string complete(const std::string&) override {
    ++calls_;
    return response_;
  }
  long calls() const { return calls_; }

 private:
  std::string response_;
  long calls_ = 0;
};

}  // namespace clucert
