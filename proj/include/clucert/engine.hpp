#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clucert/bounds.hpp"
#include "clucert/clustering.hpp"
#include "clucert/embedding.hpp"
#include "clucert/lexicon.hpp"
#include "clucert/model_client.hpp"
#include "clucert/perturb.hpp"
#include "clucert/text.hpp"

namespace clucert {

inline constexpr const char* kSchemaVersion = "clucert_v1";

struct GammaPolicy {
  enum class Mode { Fixed, EstimateFromTopClass };
  Mode mode = Mode::Fixed;
  double fixed_value = 1.0;

  // "fixed:<v>" or "estimate"
  static GammaPolicy parse(const std::string& text);
  std::string to_string() const;
};

struct ClusterConfig {
  bool enabled = true;
  ClusterParams params{};
};

struct SmoothingConfig {
  double mask_rate = 0.3;
  long samples_predict = 100;   // N
  long samples_certify = 1000;  // N'
  double alpha = 0.05;
  GammaPolicy gamma{};
  ClusterConfig cluster{};
  double tau = 0.5;
  long refine_length = 20;
  bool bonferroni = false;  // alpha/|labels| per interval when set
  uint64_t master_seed = 0;

  void validate() const;
};

struct VoteCounts {
  std::map<std::string, long> counts;
  long total_sampled = 0;
  long retained_after_cluster = 0;
  bool cluster_filtered = false;

  long sum() const;
  // rank 0 = top label (count desc, label asc); empty label when absent.
  std::pair<std::string, long> top(size_t rank) const;
};

struct StageTimings {
  double refine = 0, perturb = 0, embed = 0, cluster = 0, query = 0, certify = 0;
  void add(const StageTimings& other);
};

struct QueryStats {
  long classifier_calls = 0;
  long transport_failures = 0;
  long scorer_calls = 0;
};

// Tally labels over cluster-filtered samples. Clustering (when enabled)
// happens before querying, so only retained samples are classified.
VoteCounts tally_votes(const std::vector<PerturbedSample>& samples, Classifier& model,
                       const ClusterConfig& cluster, SentenceEmbedder& embedder,
                       QueryStats* stats = nullptr, StageTimings* timings = nullptr);

// sample -> embed -> cluster -> classify for one round of n_samples draws.
// The engine masks k = n - floor((1-m)n) positions so the retention count
// matches the certification combinatorics exactly.
VoteCounts classifier_counts(const Sentence& s, Classifier& model,
                             const SmoothingConfig& config, long n_samples,
                             const Lexicon& lexicon, SentenceEmbedder& embedder,
                             uint64_t round_seed, QueryStats* stats = nullptr,
                             StageTimings* timings = nullptr);

struct PredictOutcome {
  std::string label;
  double p_hat = 0.0;
  VoteCounts votes;
};

// Majority vote with a lexicographic tie-break. Throws when no samples were
// retained.
PredictOutcome predict(const Sentence& s, Classifier& model,
                       const SmoothingConfig& config, const Lexicon& lexicon,
                       SentenceEmbedder& embedder, uint64_t seed,
                       QueryStats* stats = nullptr, StageTimings* timings = nullptr);

// Per-class Clopper-Pearson bounds over the retained samples. The label
// universe is the observed labels plus label_set plus OTHER; an open label set
// (empty label_set) adds a pooled _unseen_ competitor with zero successes.
// ensure_label, when non-empty, is forced into the universe (the predicted
// label can be absent from a fresh certify round under an open label set).
std::map<std::string, ConfidenceBound> class_bounds(const VoteCounts& votes,
                                                    const std::vector<std::string>& label_set,
                                                    double alpha, bool bonferroni,
                                                    const std::string& ensure_label = "");

struct CertificationResult {
  std::string input_id;
  bool abstained = true;
  std::string predicted_label;
  std::optional<bool> correct;  // set when a ground label was supplied
  RadiusOutcome radius{};       // meaningful when !abstained
  double top_prob_estimate = 0.0;
  std::map<std::string, ConfidenceBound> bounds;
  double gamma_used = 0.0;
  std::string gamma_policy;
  VoteCounts predict_votes;
  VoteCounts certify_votes;
  double wall_time_s = 0.0;
  long query_count = 0;
  long transport_failures = 0;
  std::string diagnostic;
  uint64_t seed = 0;
};

// Full certification pass: predict round (N samples), two-class binomial
// abstention test, fresh certify round (N' samples), per-class bounds, gamma
// policy, radius search. The sentence is expected to be refined already; the
// radius is computed with n = |s| and s = retention_count(n, mask_rate).
CertificationResult certify(const Sentence& s, const std::string& ground_label,
                            Classifier& model, const SmoothingConfig& config,
                            const std::vector<std::string>& label_set,
                            const Lexicon& lexicon, SentenceEmbedder& embedder,
                            uint64_t record_seed, const std::string& input_id = "",
                            StageTimings* timings = nullptr);

// One JSON object per result. Timing is volatile across runs and therefore
// only emitted when include_timing is set; everything else is reproducible
// byte for byte from (config, seed).
nlohmann::json result_to_json(const CertificationResult& r, bool include_timing = false);

// ---------------------------------------------------------------------------
// Exact enumeration oracle (small n, deterministic recovery)

// Exact label distribution of f(T(w,T)) over all C(n,s) retention sets.
// Requires n <= 12 and a deterministic recovery map: every sentence token has
// at most one lexicon candidate (masked tokens with no candidate keep their
// original token). Returns per-label counts plus the total C(n,s).
std::pair<std::map<std::string, long>, long> exact_vote_distribution(
    const Sentence& s, Classifier& model, double mask_rate, const Lexicon& lexicon);

double exact_smoothed_prob(const Sentence& s, Classifier& model, double mask_rate,
                           const std::string& label, const Lexicon& lexicon);

struct DriftBoundCheck {
  double lhs = 0.0;  // max_c |p_c(w) - p_c(w')|
  double rhs = 0.0;  // Delta_d at gamma = 1
  bool holds = false;
  long distance = 0;
};

// Exact two-sided comparison of the probability-drift bound; the verdict is
// an exact integer comparison, free of rounding.
DriftBoundCheck verify_drift_bound(const Sentence& w, const Sentence& w_prime,
                              Classifier& model, double mask_rate,
                              const Lexicon& lexicon);

}  // namespace clucert
