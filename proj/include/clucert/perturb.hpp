#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "clucert/embedding.hpp"
#include "clucert/lexicon.hpp"
#include "clucert/text.hpp"

namespace clucert {

// Retained positions (0-based) for the mask operation.
struct RetentionSet {
  std::vector<int> positions;  // sorted, unique
  long sentence_length = 0;
};

// A sentence variant plus provenance: which positions actually changed and
// the seed the draw came from.
struct PerturbedSample {
  Sentence sentence;
  std::vector<int> substituted_positions;  // sorted, 0-based
  uint64_t origin_seed = 0;
};

// floor with a small epsilon so that values like (1 - 0.4) * 5 land on the
// intended integer despite binary rounding.
long floor_eps(double x);

// s = floor((1 - m) * n). Accepts the documented boundary values m = 0
// (nothing masked) and m = 1 (every position maskable); rejects m outside
// [0, 1].
long retention_count(long n, double mask_rate);

// Keep tokens at the retained positions, replace the rest with [MASK].
Sentence mask(const Sentence& s, const RetentionSet& retained);

// Uniformly random retention set of size s.
RetentionSet sample_retention(long n, long s, uint64_t seed);

// Memoizes candidate scores per (position, candidate) for one source
// sentence, so a batch does not recompute embeddings.
class ScoreCache {
 public:
  bool lookup(int position, const std::string& candidate, double* out) const;
  void store(int position, const std::string& candidate, double score);

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, double> map_;
};

// Cosine similarity between the embedding of the original sentence and the
// embedding of the sentence with one position replaced by the candidate.
double score_candidate(const Sentence& s, int position, const std::string& candidate,
                       SentenceEmbedder& embedder);

// Mask-then-recover in one step: draws `budget` distinct positions, filters
// each position's lexicon candidates by score >= tau, and substitutes a
// uniformly random survivor. Positions with no surviving candidate keep the
// original token and are excluded from substituted_positions. Deterministic
// given (sentence, budget, lexicon, tau, seed). tau <= -1 disables scoring
// entirely (every candidate survives).
PerturbedSample substitute_budget(const Sentence& s, long budget, const Lexicon& lexicon,
                                  SentenceEmbedder& embedder, double tau, uint64_t seed,
                                  ScoreCache* cache = nullptr);

// Standalone form with budget floor(m * n).
PerturbedSample substitute(const Sentence& s, double mask_rate, const Lexicon& lexicon,
                           SentenceEmbedder& embedder, double tau, uint64_t seed,
                           ScoreCache* cache = nullptr);

// count independent draws with per-sample seeds derived from (master_seed,
// index); reproducible and schedule-independent.
std::vector<PerturbedSample> sample_batch_budget(const Sentence& s, long count,
                                                 long budget, const Lexicon& lexicon,
                                                 SentenceEmbedder& embedder, double tau,
                                                 uint64_t master_seed);

std::vector<PerturbedSample> sample_batch(const Sentence& s, long count, double mask_rate,
                                          const Lexicon& lexicon,
                                          SentenceEmbedder& embedder, double tau,
                                          uint64_t master_seed);

}  // namespace clucert
