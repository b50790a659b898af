#pragma once

#include <atomic>
#include <string>
#include <vector>

#include "clucert/model_client.hpp"
#include "clucert/text.hpp"

namespace clucert {

struct ImportanceScores {
  std::vector<double> scores;  // one per token position
  std::string scorer_id;
};

// Top-L selection result. kept_positions are original indices, ascending, so
// the output is a subsequence of the input.
struct RefinedSentence {
  Sentence sentence;
  std::vector<int> kept_positions;
  long original_length = 0;
};

class ImportanceScorer {
 public:
  virtual ~ImportanceScorer() = default;
  virtual ImportanceScores score(const Sentence& s) = 0;
  virtual std::string id() const = 0;
  virtual long queries_used() const { return 0; }
};

// Zero-cost deterministic scorer for offline runs and tests:
//   score(token at 1-based position p) = length(token) + 0.001 * (n - p).
// Longer tokens rank higher; the position term breaks ties toward earlier
// tokens.
class OfflineScorer final : public ImportanceScorer {
 public:
  ImportanceScores score(const Sentence& s) override;
  std::string id() const override { return "offline"; }
};

// LLM-backed scorer: issues each of the 4-level word-importance prompts, maps
// Very Important/Important/Less Important/Not Important to 3/2/1/0, and
// averages the levels across prompts. A token missing from a response gets
// level 0 for that prompt; unparseable lines count as Not Important.
class LlmScorer final : public ImportanceScorer {
 public:
  // num_prompts = 0 uses the full prompt set.
  LlmScorer(ChatTransport& transport, QueryCache* cache = nullptr,
            size_t num_prompts = 0);
  ImportanceScores score(const Sentence& s) override;
  std::string id() const override { return "llm"; }
  long queries_used() const override { return queries_.load(); }

  static const std::vector<std::string>& importance_prompts();
  // Exposed for tests: per-token levels parsed from one response.
  static std::vector<int> parse_levels(const Sentence& s, const std::string& response);

 private:
  ChatTransport& transport_;
  QueryCache* cache_;
  size_t num_prompts_;
  std::atomic<long> queries_{0};
};

// Keeps the target_length highest-scoring tokens (all of them when the
// sentence is short), ties broken toward earlier positions, relative order
// preserved. Downstream certification runs on the refined length.
RefinedSentence refine(const Sentence& s, const ImportanceScores& scores,
                       long target_length);

RefinedSentence refine_with_scorer(const Sentence& s, ImportanceScorer& scorer,
                                   long target_length);

}  // namespace clucert
