#include "clucert/perturb.hpp"

#include <cmath>
#include <stdexcept>

#include "clucert/rng.hpp"

namespace clucert {

long floor_eps(double x) { return static_cast<long>(std::floor(x + 1e-9)); }

long retention_count(long n, double mask_rate) {
  if (n < 1) throw std::invalid_argument("retention_count: n must be >= 1");
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0))
    throw std::invalid_argument("retention_count: mask rate must be in [0,1]");
  return floor_eps((1.0 - mask_rate) * static_cast<double>(n));
}

Sentence mask(const Sentence& s, const RetentionSet& retained) {
  if (retained.sentence_length != static_cast<long>(s.size()))
    throw std::invalid_argument("mask: retention set length mismatch");
  std::vector<bool> keep(s.size(), false);
  for (int pos : retained.positions) {
    if (pos < 0 || pos >= static_cast<int>(s.size()))
      throw std::invalid_argument("mask: position out of range");
    keep[static_cast<size_t>(pos)] = true;
  }
  Sentence out = s;
  for (size_t i = 0; i < out.tokens.size(); ++i)
    if (!keep[i]) out.tokens[i] = kMaskToken;
  return out;
}

RetentionSet sample_retention(long n, long s, uint64_t seed) {
  if (s < 0 || s > n) throw std::invalid_argument("sample_retention: invalid s");
  Rng rng(seed);
  RetentionSet out;
  out.sentence_length = n;
  out.positions = rng.sample_indices(static_cast<int>(n), static_cast<int>(s));
  return out;
}

bool ScoreCache::lookup(int position, const std::string& candidate, double* out) const {
  const std::string key = std::to_string(position) + ":" + candidate;
  std::lock_guard lk(mutex_);
  const auto it = map_.find(key);
  if (it == map_.end()) return false;
  *out = it->second;
  return true;
}

void ScoreCache::store(int position, const std::string& candidate, double score) {
  const std::string key = std::to_string(position) + ":" + candidate;
  std::lock_guard lk(mutex_);
  map_.emplace(key, score);
}

double score_candidate(const Sentence& s, int position, const std::string& candidate,
                       SentenceEmbedder& embedder) {
  if (s.empty()) throw std::invalid_argument("score_candidate: empty sentence");
  if (position < 0 || position >= static_cast<int>(s.size()))
    throw std::invalid_argument("score_candidate: position out of range");
  if (candidate.empty())
    throw std::invalid_argument("score_candidate: empty candidate");
  const EmbeddingVector original = embedder.embed(s);
  Sentence modified = s;
  modified.tokens[static_cast<size_t>(position)] = candidate;
  return cosine(original, embedder.embed(modified));
}

namespace {

double scored(const Sentence& s, int position, const std::string& candidate,
              SentenceEmbedder& embedder, ScoreCache* cache) {
  double v = 0.0;
  if (cache && cache->lookup(position, candidate, &v)) return v;
  v = score_candidate(s, position, candidate, embedder);
  if (cache) cache->store(position, candidate, v);
  return v;
}

}  // namespace

PerturbedSample substitute_budget(const Sentence& s, long budget, const Lexicon& lexicon,
                                  SentenceEmbedder& embedder, double tau, uint64_t seed,
                                  ScoreCache* cache) {
  validate_sentence(s);
  const long n = static_cast<long>(s.size());
  if (budget < 0 || budget > n)
    throw std::invalid_argument("substitute: budget out of range");
  if (!(tau >= -1.0 && tau <= 1.0))
    throw std::invalid_argument("substitute: tau must be in [-1,1]");

  PerturbedSample out;
  out.sentence = s;
  out.origin_seed = seed;

  // Separate streams: the position draw is independent of tau and of how many
  // candidates survive at each position.
  Rng pos_rng(derive_seed(seed, 1));
  Rng choice_rng(derive_seed(seed, 2));
  const std::vector<int> positions =
      pos_rng.sample_indices(static_cast<int>(n), static_cast<int>(budget));

  for (int pos : positions) {
    const std::string& token = s.tokens[static_cast<size_t>(pos)];
    const auto* cands = lexicon.candidates(token);
    if (!cands || cands->empty()) continue;
    std::vector<const std::string*> survivors;
    for (const auto& cand : *cands) {
      if (tau <= -1.0 || scored(s, pos, cand, embedder, cache) >= tau)
        survivors.push_back(&cand);
    }
    if (survivors.empty()) continue;  // keep original if no valid synonym
    const auto pick = survivors[choice_rng.below(survivors.size())];
    out.sentence.tokens[static_cast<size_t>(pos)] = *pick;
    out.substituted_positions.push_back(pos);
  }
  return out;
}

PerturbedSample substitute(const Sentence& s, double mask_rate, const Lexicon& lexicon,
                           SentenceEmbedder& embedder, double tau, uint64_t seed,
                           ScoreCache* cache) {
  validate_sentence(s);
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0))
    throw std::invalid_argument("substitute: mask rate must be in [0,1]");
  const long budget = floor_eps(mask_rate * static_cast<double>(s.size()));
  return substitute_budget(s, budget, lexicon, embedder, tau, seed, cache);
}

std::vector<PerturbedSample> sample_batch_budget(const Sentence& s, long count,
                                                 long budget, const Lexicon& lexicon,
                                                 SentenceEmbedder& embedder, double tau,
                                                 uint64_t master_seed) {
  if (count < 1) throw std::invalid_argument("sample_batch: count must be >= 1");
  ScoreCache cache;
  std::vector<PerturbedSample> out;
  out.reserve(static_cast<size_t>(count));
  for (long i = 0; i < count; ++i) {
    out.push_back(substitute_budget(s, budget, lexicon, embedder, tau,
                                    derive_seed(master_seed, static_cast<uint64_t>(i)),
                                    &cache));
  }
  return out;
}

std::vector<PerturbedSample> sample_batch(const Sentence& s, long count, double mask_rate,
                                          const Lexicon& lexicon,
                                          SentenceEmbedder& embedder, double tau,
                                          uint64_t master_seed) {
  const long budget = floor_eps(mask_rate * static_cast<double>(s.size()));
  return sample_batch_budget(s, count, budget, lexicon, embedder, tau, master_seed);
}

}  // namespace clucert
