#include "clucert/model_client.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "clucert/rng.hpp"

namespace clucert {
namespace {

std::string lower_ascii(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

constexpr const char* kPreamble =
    "Below is an instruction that describes a task, followed by an input text. "
    "Respond appropriately by completing the task according to the instruction.";

uint64_t cache_key(const std::string& endpoint, const std::string& model,
                   double temperature, const std::string& prompt) {
  std::ostringstream os;
  os << endpoint << '\x1f' << model << '\x1f' << temperature << '\x1f' << prompt;
  return fnv1a64(os.str());
}

}  // namespace

TaskSpec make_task(const std::string& task_id) {
  TaskSpec t;
  t.task_id = task_id;
  if (task_id == "sentiment2") {
    t.label_set = {"positive", "negative"};
    t.instruction_text =
        "Below is an instruction that describes a sentiment classification task, "
        "followed by an English sentence as input. Respond with either \"positive\" "
        "or \"negative\" according to the sentence sentiment.";
    t.extraction = TaskSpec::Extraction::KeywordSingle;
  } else if (task_id == "topic4") {
    t.label_set = {"Sports", "World", "Technology", "Business"};
    t.instruction_text =
        "Below is an instruction for classifying a news article into one of four "
        "categories. Respond with the correct category name: Sports, World, "
        "Technology, or Business.";
    t.extraction = TaskSpec::Extraction::KeywordSingle;
  } else if (task_id == "math_numeric") {
    t.label_set = {};
    t.instruction_text =
        "Below is an instruction for solving a math word problem. Read the problem "
        "and return only the final numeric answer.";
    t.extraction = TaskSpec::Extraction::LastNumber;
  } else {
    throw std::invalid_argument("unknown task id: " + task_id);
  }
  return t;
}

PromptEnvelope render_prompt(const TaskSpec& task, const std::string& input_text) {
  if (input_text.empty()) throw std::invalid_argument("render_prompt: empty input");
  PromptEnvelope env;
  env.instruction = task.instruction_text;
  env.input_text = input_text;
  env.rendered = std::string(kPreamble) + "\n\n###Instruction:\n" + env.instruction +
                 "\n\n###Input:\n" + env.input_text + "\n\n###Response:\n";
  return env;
}

std::string canonical_numeric(const std::string& text) {
  std::string s;
  for (char c : text)
    if (c != ',') s.push_back(c);
  if (s.empty()) return "";
  bool negative = false;
  size_t i = 0;
  if (s[0] == '+' || s[0] == '-') {
    negative = s[0] == '-';
    i = 1;
  }
  std::string int_part, frac_part;
  bool seen_dot = false;
  for (; i < s.size(); ++i) {
    if (s[i] == '.') {
      if (seen_dot) return "";
      seen_dot = true;
    } else if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      (seen_dot ? frac_part : int_part).push_back(s[i]);
    } else {
      return "";
    }
  }
  if (int_part.empty() && frac_part.empty()) return "";
  while (int_part.size() > 1 && int_part[0] == '0') int_part.erase(0, 1);
  if (int_part.empty()) int_part = "0";
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  std::string out = int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  if (negative && out != "0") out = "-" + out;
  return out;
}

std::string parse_response(const std::string& text, const TaskSpec& task) {
  if (task.extraction == TaskSpec::Extraction::KeywordSingle) {
    const std::string haystack = lower_ascii(text);
    std::string matched;
    int matches = 0;
    for (const auto& label : task.label_set) {
      if (haystack.find(lower_ascii(label)) != std::string::npos) {
        ++matches;
        matched = label;
      }
    }
    return matches == 1 ? matched : kOtherLabel;
  }
  // LastNumber: final numeric literal; thousands separators accepted.
  static const std::regex number_re(
      R"([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+)");
  std::string last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number_re);
       it != std::sregex_iterator(); ++it) {
    last = it->str();
  }
  if (last.empty()) return kOtherLabel;
  const std::string canon = canonical_numeric(last);
  return canon.empty() ? kOtherLabel : canon;
}

// ---------------------------------------------------------------------------
// HTTP transport

struct HttpChatTransport::Impl {
  HttpTransportConfig config;
  httplib::Client client;
  std::mutex slot_mutex;
  std::condition_variable slot_cv;
  int in_flight = 0;

  explicit Impl(HttpTransportConfig cfg)
      : config(std::move(cfg)), client(config.endpoint) {
    client.set_connection_timeout(config.timeout_s, 0);
    client.set_read_timeout(config.timeout_s, 0);
    if (!config.api_key.empty())
      client.set_default_headers({{"Authorization", "Bearer " + config.api_key}});
  }
};

HttpChatTransport::HttpChatTransport(HttpTransportConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpChatTransport::~HttpChatTransport() = default;

std::string HttpChatTransport::endpoint_id() const { return impl_->config.endpoint; }
std::string HttpChatTransport::model_name() const { return impl_->config.model; }

std::string HttpChatTransport::complete(const std::string& prompt) {
  nlohmann::json body;
  body["model"] = impl_->config.model;
  body["messages"] = nlohmann::json::array(
      {nlohmann::json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = 0;
  const std::string payload = body.dump();

  std::string last_error;
  const int budget = impl_->config.max_retries;
  for (int attempt = 0; attempt <= budget; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(
          impl_->config.backoff_s * static_cast<double>(1 << (attempt - 1))));
    }
    ++calls_;
    httplib::Result res;
    {
      std::unique_lock lk(impl_->slot_mutex);
      impl_->slot_cv.wait(lk, [&] { return impl_->in_flight < impl_->config.max_in_flight; });
      ++impl_->in_flight;
      lk.unlock();
      res = impl_->client.Post(impl_->config.path, payload, "application/json");
      lk.lock();
      --impl_->in_flight;
      impl_->slot_cv.notify_one();
    }
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw TransportError("chat endpoint returned status " +
                               std::to_string(res->status) + ": " + res->body,
                           attempt + 1);
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw TransportError(std::string("malformed chat response: ") + e.what(),
                           attempt + 1);
    }
  }
  throw TransportError("chat request failed after retries: " + last_error, budget + 1);
}

// ---------------------------------------------------------------------------
// Query cache

struct QueryCache::Impl {
  struct Entry {
    std::string endpoint, model, prompt, response;
    double temperature = 0.0;
  };
  mutable std::mutex mutex;
  std::unordered_multimap<uint64_t, Entry> entries;
  std::ofstream append;
  std::string path;
};

QueryCache::QueryCache(std::string path) : impl_(std::make_unique<Impl>()) {
  impl_->path = std::move(path);
  if (impl_->path.empty()) return;
  std::ifstream in(impl_->path);
  if (in) {
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        Impl::Entry e;
        e.endpoint = j.at("endpoint").get<std::string>();
        e.model = j.at("model").get<std::string>();
        e.temperature = j.at("temperature").get<double>();
        e.prompt = j.at("prompt").get<std::string>();
        e.response = j.at("response").get<std::string>();
        const uint64_t key = cache_key(e.endpoint, e.model, e.temperature, e.prompt);
        impl_->entries.emplace(key, std::move(e));
      } catch (const std::exception& ex) {
        throw std::runtime_error("cache file " + impl_->path + " line " +
                                 std::to_string(lineno) + ": " + ex.what());
      }
    }
  }
  impl_->append.open(impl_->path, std::ios::app);
  if (!impl_->append)
    throw std::runtime_error("cache file not writable: " + impl_->path);
}

QueryCache::~QueryCache() = default;

std::optional<std::string> QueryCache::get(const std::string& endpoint,
                                           const std::string& model, double temperature,
                                           const std::string& prompt) {
  const uint64_t key = cache_key(endpoint, model, temperature, prompt);
  std::lock_guard lk(impl_->mutex);
  auto [lo, hi] = impl_->entries.equal_range(key);
  for (auto it = lo; it != hi; ++it) {
    const auto& e = it->second;
    if (e.endpoint == endpoint && e.model == model && e.temperature == temperature &&
        e.prompt == prompt)
      return e.response;
  }
  return std::nullopt;
}

void QueryCache::put(const std::string& endpoint, const std::string& model,
                     double temperature, const std::string& prompt,
                     const std::string& response) {
  const uint64_t key = cache_key(endpoint, model, temperature, prompt);
  std::lock_guard lk(impl_->mutex);
  Impl::Entry e{endpoint, model, prompt, response, temperature};
  if (impl_->append.is_open()) {
    nlohmann::json j;
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(key));
    j["key"] = hex;
    j["endpoint"] = endpoint;
    j["model"] = model;
    j["temperature"] = temperature;
    j["prompt"] = prompt;
    j["response"] = response;
    j["ts"] = static_cast<long>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
    impl_->append << j.dump() << '\n';
    impl_->append.flush();
  }
  impl_->entries.emplace(key, std::move(e));
}

size_t QueryCache::size() const {
  std::lock_guard lk(impl_->mutex);
  return impl_->entries.size();
}

// ---------------------------------------------------------------------------
// Classifiers

ChatClassifier::ChatClassifier(TaskSpec task, ChatTransport& transport, QueryCache* cache)
    : task_(std::move(task)), transport_(transport), cache_(cache) {}

std::string ChatClassifier::describe() const {
  return "chat:" + task_.task_id + "@" + transport_.model_name();
}

std::string ChatClassifier::classify(const Sentence& s) {
  const auto env = render_prompt(task_, detokenize(s));
  const std::string endpoint = transport_.endpoint_id();
  const std::string model = transport_.model_name();
  if (cache_) {
    if (auto hit = cache_->get(endpoint, model, 0.0, env.rendered)) {
      ++cache_hits_;
      return parse_response(*hit, task_);
    }
  }
  std::string response;
  try {
    ++transport_calls_;
    response = transport_.complete(env.rendered);
  } catch (const TransportError&) {
    ++failures_;
    return kOtherLabel;
  }
  if (cache_) cache_->put(endpoint, model, 0.0, env.rendered, response);
  return parse_response(response, task_);
}

LipschitzSyntheticClassifier::LipschitzSyntheticClassifier(uint64_t direction_seed,
                                                           double threshold,
                                                           std::string label_above,
                                                           std::string label_below)
    : threshold_(threshold),
      label_above_(std::move(label_above)),
      label_below_(std::move(label_below)) {
  Rng rng(direction_seed);
  direction_.resize(OfflineHashEmbedder::kDim);
  double norm = 0.0;
  for (auto& x : direction_) {
    x = rng.uniform01() * 2.0 - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : direction_) x /= norm;
}

double LipschitzSyntheticClassifier::project(const EmbeddingVector& v) const {
  if (v.size() != direction_.size())
    throw std::invalid_argument("project: dimension mismatch");
  double dot = 0.0;
  for (size_t i = 0; i < v.size(); ++i) dot += v[i] * direction_[i];
  return dot;
}

std::string LipschitzSyntheticClassifier::classify(const Sentence& s) {
  return project(embedder_.embed(s)) >= threshold_ ? label_above_ : label_below_;
}

std::string LipschitzSyntheticClassifier::describe() const {
  return "stub:lipschitz";
}

namespace {

std::vector<std::string> split_colon(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

class ConstantClassifier final : public Classifier {
 public:
  explicit ConstantClassifier(std::string label) : label_(std::move(label)) {}
  std::string classify(const Sentence&) override { return label_; }
  std::string describe() const override { return "stub:constant:" + label_; }

 private:
  std::string label_;
};

class KeywordClassifier final : public Classifier {
 public:
  KeywordClassifier(std::string token, std::string if_present, std::string otherwise)
      : token_(std::move(token)),
        if_present_(std::move(if_present)),
        otherwise_(std::move(otherwise)) {}
  std::string classify(const Sentence& s) override {
    for (const auto& t : s.tokens)
      if (t == token_) return if_present_;
    return otherwise_;
  }
  std::string describe() const override { return "stub:keyword:" + token_; }

 private:
  std::string token_, if_present_, otherwise_;
};

class PositionClassifier final : public Classifier {
 public:
  PositionClassifier(int index, std::string token, std::string if_equal,
                     std::string otherwise)
      : index_(index),
        token_(std::move(token)),
        if_equal_(std::move(if_equal)),
        otherwise_(std::move(otherwise)) {}
  std::string classify(const Sentence& s) override {
    if (index_ < 0 || index_ >= static_cast<int>(s.size())) return otherwise_;
    return s.tokens[static_cast<size_t>(index_)] == token_ ? if_equal_ : otherwise_;
  }
  std::string describe() const override { return "stub:position"; }

 private:
  int index_;
  std::string token_, if_equal_, otherwise_;
};

class FailingClassifier final : public Classifier {
 public:
  std::string classify(const Sentence&) override {
    ++failures_;
    return kOtherLabel;
  }
  std::string describe() const override { return "stub:failing"; }
  long transport_failures() const override { return failures_; }

 private:
  long failures_ = 0;
};

}  // namespace

std::unique_ptr<Classifier> make_stub_classifier(const std::string& rule) {
  const auto parts = split_colon(rule);
  const std::string& kind = parts[0];
  if (kind == "constant" && parts.size() == 2)
    return std::make_unique<ConstantClassifier>(parts[1]);
  if (kind == "keyword" && parts.size() == 4)
    return std::make_unique<KeywordClassifier>(parts[1], parts[2], parts[3]);
  if (kind == "position" && parts.size() == 5)
    return std::make_unique<PositionClassifier>(std::stoi(parts[1]), parts[2], parts[3],
                                                parts[4]);
  if (kind == "lipschitz" && parts.size() == 3)
    return std::make_unique<LipschitzSyntheticClassifier>(
        std::stoull(parts[1]), std::stod(parts[2]));
  if (kind == "failing" && parts.size() == 1)
    return std::make_unique<FailingClassifier>();
  throw std::invalid_argument("unknown stub classifier rule: " + rule);
}

}  // namespace clucert
