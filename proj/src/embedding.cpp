#include "clucert/embedding.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace clucert {

std::vector<EmbeddingVector> SentenceEmbedder::embed_batch(
    const std::vector<Sentence>& batch) {
  std::vector<EmbeddingVector> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(embed(s));
  return out;
}

uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

EmbeddingVector OfflineHashEmbedder::embed(const Sentence& s) {
  if (s.empty()) throw std::invalid_argument("embed: empty sentence");
  EmbeddingVector v(kDim, 0.0);
  for (const auto& tok : s.tokens) v[fnv1a64(tok) % kDim] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine: dimension mismatch");
  if (a.empty()) throw std::invalid_argument("cosine: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine: zero-norm input");
  const double sim = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::min(1.0, std::max(-1.0, sim));
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  return 1.0 - cosine(a, b);
}

struct RemoteEmbedder::Impl {
  RemoteEmbedderConfig config;
  httplib::Client client;
  std::mutex slot_mutex;
  std::condition_variable slot_cv;
  int in_flight = 0;

  explicit Impl(RemoteEmbedderConfig cfg)
      : config(std::move(cfg)), client(config.endpoint) {
    client.set_connection_timeout(config.timeout_s, 0);
    client.set_read_timeout(config.timeout_s, 0);
    if (!config.api_key.empty())
      client.set_default_headers({{"Authorization", "Bearer " + config.api_key}});
  }

  struct Slot {
    Impl& impl;
    explicit Slot(Impl& i) : impl(i) {
      std::unique_lock lk(impl.slot_mutex);
      impl.slot_cv.wait(lk, [&] { return impl.in_flight < impl.config.max_in_flight; });
      ++impl.in_flight;
    }
    ~Slot() {
      {
        std::lock_guard lk(impl.slot_mutex);
        --impl.in_flight;
      }
      impl.slot_cv.notify_one();
    }
  };

  std::vector<EmbeddingVector> request(const std::vector<std::string>& inputs) {
    nlohmann::json body;
    body["input"] = inputs;
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(
            config.backoff_s * static_cast<double>(1 << (attempt - 1))));
      }
      httplib::Result res;
      {
        Slot slot(*this);
        res = client.Post(config.path, payload, "application/json");
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
        throw EmbeddingError("embedding endpoint returned status " +
                                 std::to_string(res->status) + ": " + res->body,
                             attempt + 1);
      try {
        const auto j = nlohmann::json::parse(res->body);
        std::vector<EmbeddingVector> out;
        for (const auto& item : j.at("data"))
          out.push_back(item.at("embedding").get<EmbeddingVector>());
        if (out.size() != inputs.size())
          throw std::runtime_error("response size mismatch");
        return out;
      } catch (const std::exception& e) {
        throw EmbeddingError(std::string("malformed embedding response: ") + e.what(),
                             attempt + 1);
      }
    }
    throw EmbeddingError("embedding request failed after retries: " + last_error,
                         config.max_retries + 1);
  }
};

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteEmbedder::~RemoteEmbedder() = default;

EmbeddingVector RemoteEmbedder::embed(const Sentence& s) {
  if (s.empty()) throw std::invalid_argument("embed: empty sentence");
  auto batch = impl_->request({detokenize(s)});
  if (dimension_ == 0) dimension_ = static_cast<int>(batch[0].size());
  return std::move(batch[0]);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(
    const std::vector<Sentence>& batch) {
  if (batch.empty()) return {};
  std::vector<std::string> inputs;
  inputs.reserve(batch.size());
  for (const auto& s : batch) {
    if (s.empty()) throw std::invalid_argument("embed: empty sentence");
    inputs.push_back(detokenize(s));
  }
  auto out = impl_->request(inputs);
  if (dimension_ == 0 && !out.empty()) dimension_ = static_cast<int>(out[0].size());
  return out;
}

}  // namespace clucert
