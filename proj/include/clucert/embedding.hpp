#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "clucert/text.hpp"

namespace clucert {

using EmbeddingVector = std::vector<double>;

struct EmbeddingError : std::runtime_error {
  int attempts = 0;
  EmbeddingError(const std::string& what, int attempts_)
      : std::runtime_error(what), attempts(attempts_) {}
};

// Sentence-embedding contract shared by candidate scoring and clustering.
// Implementations must be deterministic (equal sentences yield equal vectors)
// and safe for concurrent calls.
class SentenceEmbedder {
 public:
  virtual ~SentenceEmbedder() = default;
  virtual EmbeddingVector embed(const Sentence& s) = 0;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<Sentence>& batch);
  virtual int dimension() const = 0;
};

// FNV-1a 64-bit; fixed here so the offline embedder does not depend on the
// implementation-defined std::hash.
uint64_t fnv1a64(const std::string& data);

// Offline test embedder: each token adds +1 at index fnv1a64(token) mod 64,
// then the vector is L2-normalized. Dependency-free and sensitive to single
// token substitutions.
class OfflineHashEmbedder final : public SentenceEmbedder {
 public:
  static constexpr int kDim = 64;
  EmbeddingVector embed(const Sentence& s) override;
  int dimension() const override { return kDim; }
};

struct RemoteEmbedderConfig {
  std::string endpoint;        // base URL, e.g. http://host:port
  std::string path = "/v1/embeddings";
  std::string api_key;         // usually from CLUCERT_API_KEY
  int timeout_s = 30;
  int max_retries = 3;
  double backoff_s = 0.25;
  int max_in_flight = 4;
};

// Minimal HTTP embedding client: POST {"input": [string, ...]} and read back
// {"data": [{"embedding": [float, ...]}, ...]}.
class RemoteEmbedder final : public SentenceEmbedder {
 public:
  explicit RemoteEmbedder(RemoteEmbedderConfig config);
  ~RemoteEmbedder() override;
  EmbeddingVector embed(const Sentence& s) override;
  std::vector<EmbeddingVector> embed_batch(const std::vector<Sentence>& batch) override;
  int dimension() const override { return dimension_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int dimension_ = 0;  // learned from the first response
};

// Standard cosine similarity, clamped to [-1,1] against rounding. Throws on
// dimension mismatch or zero-norm input.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Clustering distance: 1 - cosine similarity.
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace clucert
