#include "clucert/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "clucert/rng.hpp"

namespace clucert {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct StageTimer {
  double* slot;
  Clock::time_point start = Clock::now();
  explicit StageTimer(double* s) : slot(s) {}
  ~StageTimer() {
    if (slot) *slot += seconds_since(start);
  }
};

}  // namespace

GammaPolicy GammaPolicy::parse(const std::string& text) {
  GammaPolicy g;
  if (text == "estimate") {
    g.mode = Mode::EstimateFromTopClass;
    return g;
  }
  if (text.rfind("fixed:", 0) == 0) {
    g.mode = Mode::Fixed;
    g.fixed_value = std::stod(text.substr(6));
    if (!(g.fixed_value >= 0.0 && g.fixed_value <= 1.0))
      throw std::invalid_argument("gamma fixed value must be in [0,1]");
    return g;
  }
  throw std::invalid_argument("gamma policy must be 'fixed:<v>' or 'estimate': " + text);
}

std::string GammaPolicy::to_string() const {
  if (mode == Mode::EstimateFromTopClass) return "estimate_from_top_class(heuristic)";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fixed:%g", fixed_value);
  return buf;
}

void SmoothingConfig::validate() const {
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0))
    throw std::invalid_argument("config: mask_rate must be in [0,1]");
  if (samples_predict < 1 || samples_certify < 1)
    throw std::invalid_argument("config: sample counts must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("config: alpha must be in (0,1)");
  if (!(tau >= -1.0 && tau <= 1.0))
    throw std::invalid_argument("config: tau must be in [-1,1]");
  if (refine_length < 1)
    throw std::invalid_argument("config: refine_length must be >= 1");
  if (cluster.enabled) {
    if (cluster.params.eps < 0.0 || cluster.params.min_samples < 1)
      throw std::invalid_argument("config: invalid cluster parameters");
  }
  if (gamma.mode == GammaPolicy::Mode::Fixed &&
      !(gamma.fixed_value >= 0.0 && gamma.fixed_value <= 1.0))
    throw std::invalid_argument("config: fixed gamma must be in [0,1]");
}

long VoteCounts::sum() const {
  long s = 0;
  for (const auto& [_, c] : counts) s += c;
  return s;
}

std::pair<std::string, long> VoteCounts::top(size_t rank) const {
  std::vector<std::pair<std::string, long>> ordered(counts.begin(), counts.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (rank >= ordered.size()) return {"", 0};
  return ordered[rank];
}

void StageTimings::add(const StageTimings& other) {
  refine += other.refine;
  perturb += other.perturb;
  embed += other.embed;
  cluster += other.cluster;
  query += other.query;
  certify += other.certify;
}

VoteCounts tally_votes(const std::vector<PerturbedSample>& samples, Classifier& model,
                       const ClusterConfig& cluster, SentenceEmbedder& embedder,
                       QueryStats* stats, StageTimings* timings) {
  VoteCounts out;
  out.total_sampled = static_cast<long>(samples.size());

  const std::vector<PerturbedSample>* retained = &samples;
  FilterResult filtered;
  if (cluster.enabled && !samples.empty()) {
    std::vector<EmbeddingVector> points;
    {
      StageTimer t(timings ? &timings->embed : nullptr);
      std::vector<Sentence> batch;
      batch.reserve(samples.size());
      for (const auto& sample : samples) batch.push_back(sample.sentence);
      points = embedder.embed_batch(batch);
    }
    {
      StageTimer t(timings ? &timings->cluster : nullptr);
      const auto assignment = dbscan(points, cluster.params);
      filtered = filter_largest(samples, assignment);
    }
    retained = &filtered.retained;
    out.cluster_filtered = filtered.cluster_filtered;
  }
  out.retained_after_cluster = static_cast<long>(retained->size());

  const long before = model.transport_failures();
  {
    StageTimer t(timings ? &timings->query : nullptr);
    for (const auto& sample : *retained) {
      out.counts[model.classify(sample.sentence)]++;
      if (stats) stats->classifier_calls++;
    }
  }
  if (stats) stats->transport_failures += model.transport_failures() - before;
  return out;
}

VoteCounts classifier_counts(const Sentence& s, Classifier& model,
                             const SmoothingConfig& config, long n_samples,
                             const Lexicon& lexicon, SentenceEmbedder& embedder,
                             uint64_t round_seed, QueryStats* stats,
                             StageTimings* timings) {
  config.validate();
  const long n = static_cast<long>(s.size());
  const long budget = n - retention_count(n, config.mask_rate);
  std::vector<PerturbedSample> samples;
  {
    StageTimer t(timings ? &timings->perturb : nullptr);
    samples = sample_batch_budget(s, n_samples, budget, lexicon, embedder, config.tau,
                                  round_seed);
  }
  return tally_votes(samples, model, config.cluster, embedder, stats, timings);
}

PredictOutcome predict(const Sentence& s, Classifier& model,
                       const SmoothingConfig& config, const Lexicon& lexicon,
                       SentenceEmbedder& embedder, uint64_t seed, QueryStats* stats,
                       StageTimings* timings) {
  PredictOutcome out;
  out.votes = classifier_counts(s, model, config, config.samples_predict, lexicon,
                                embedder, seed, stats, timings);
  const long total = out.votes.sum();
  if (total == 0) throw std::runtime_error("predict: no retained samples to vote on");
  const auto [label, count] = out.votes.top(0);
  out.label = label;
  out.p_hat = static_cast<double>(count) / static_cast<double>(total);
  return out;
}

std::map<std::string, ConfidenceBound> class_bounds(const VoteCounts& votes,
                                                    const std::vector<std::string>& label_set,
                                                    double alpha, bool bonferroni,
                                                    const std::string& ensure_label) {
  const long trials = votes.retained_after_cluster;
  if (trials < 1) throw std::invalid_argument("class_bounds: no retained samples");

  std::map<std::string, long> universe;
  for (const auto& [label, count] : votes.counts) universe[label] = count;
  for (const auto& label : label_set) universe.emplace(label, 0);
  universe.emplace(kOtherLabel, 0);
  if (label_set.empty()) universe.emplace(kUnseenLabel, 0);
  if (!ensure_label.empty()) universe.emplace(ensure_label, 0);

  const double level =
      bonferroni ? alpha / static_cast<double>(universe.size()) : alpha;
  std::map<std::string, ConfidenceBound> out;
  for (const auto& [label, count] : universe)
    out[label] = clopper_pearson(count, trials, level);
  return out;
}

CertificationResult certify(const Sentence& s, const std::string& ground_label,
                            Classifier& model, const SmoothingConfig& config,
                            const std::vector<std::string>& label_set,
                            const Lexicon& lexicon, SentenceEmbedder& embedder,
                            uint64_t record_seed, const std::string& input_id,
                            StageTimings* timings) {
  config.validate();
  validate_sentence(s);
  const auto start = Clock::now();

  CertificationResult res;
  res.input_id = input_id;
  res.seed = record_seed;
  res.gamma_policy = config.gamma.to_string();
  QueryStats stats;

  const long n = static_cast<long>(s.size());
  const long retained_positions = retention_count(n, config.mask_rate);
  const uint64_t seed_predict = derive_seed(record_seed, 1);
  const uint64_t seed_certify = derive_seed(record_seed, 2);

  const auto finalize = [&](CertificationResult& r) -> CertificationResult& {
    if (!ground_label.empty() && !r.predicted_label.empty())
      r.correct = r.predicted_label == ground_label;
    r.query_count = stats.classifier_calls + stats.scorer_calls;
    r.transport_failures = stats.transport_failures;
    r.wall_time_s = seconds_since(start);
    return r;
  };

  // Predict round (N samples) + two-class binomial abstention test.
  res.predict_votes = classifier_counts(s, model, config, config.samples_predict,
                                        lexicon, embedder, seed_predict, &stats, timings);
  const long predict_total = res.predict_votes.sum();
  if (predict_total == 0) {
    res.diagnostic = "no retained samples in predict round";
    return finalize(res);
  }
  const auto [top_label, top_count] = res.predict_votes.top(0);
  const auto [second_label, second_count] = res.predict_votes.top(1);
  res.predicted_label = top_label;
  res.top_prob_estimate =
      static_cast<double>(top_count) / static_cast<double>(predict_total);

  const double p_value = binom_p_value(top_count, top_count + second_count, 0.5);
  if (p_value > config.alpha) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "top-2 binomial test p=%.6g > alpha=%g", p_value,
                  config.alpha);
    res.diagnostic = buf;
    return finalize(res);
  }
  if (top_label == kOtherLabel) {
    res.diagnostic = "top label is OTHER and can never be certified";
    return finalize(res);
  }

  // Certify round (N' fresh samples).
  res.certify_votes = classifier_counts(s, model, config, config.samples_certify,
                                        lexicon, embedder, seed_certify, &stats, timings);
  if (res.certify_votes.retained_after_cluster == 0) {
    res.diagnostic = "no retained samples in certify round";
    return finalize(res);
  }

  {
    StageTimer t(timings ? &timings->certify : nullptr);
    res.bounds = class_bounds(res.certify_votes, label_set, config.alpha,
                              config.bonferroni, top_label);
    res.gamma_used = config.gamma.mode == GammaPolicy::Mode::Fixed
                         ? config.gamma.fixed_value
                         : res.top_prob_estimate;
    res.radius =
        certified_radius(res.bounds, top_label, res.gamma_used, n, retained_positions);
  }
  res.abstained = !res.radius.certified();
  if (res.abstained && res.diagnostic.empty())
    res.diagnostic = "confidence gap <= 0";
  if (!res.abstained && res.radius.capped_at_length)
    res.diagnostic = "radius search capped at sentence length";
  return finalize(res);
}

nlohmann::json result_to_json(const CertificationResult& r, bool include_timing) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["input_id"] = r.input_id;
  j["outcome"] = r.abstained ? "abstain" : "certified";
  j["predicted_label"] = r.predicted_label;
  if (r.correct.has_value()) j["correct"] = *r.correct;
  if (!r.abstained) {
    j["radius"] = r.radius.radius;
    j["gap"] = r.radius.gap;
    j["radius_capped_at_length"] = r.radius.capped_at_length;
  }
  j["top_prob_estimate"] = r.top_prob_estimate;
  j["gamma_used"] = r.gamma_used;
  j["gamma_policy"] = r.gamma_policy;

  const auto votes_json = [](const VoteCounts& v) {
    nlohmann::json out;
    out["counts"] = v.counts;
    out["total_sampled"] = v.total_sampled;
    out["retained"] = v.retained_after_cluster;
    out["cluster_filtered"] = v.cluster_filtered;
    return out;
  };
  j["votes_predict"] = votes_json(r.predict_votes);
  j["votes_certify"] = votes_json(r.certify_votes);

  nlohmann::json bounds = nlohmann::json::object();
  for (const auto& [label, b] : r.bounds) {
    bounds[label] = {{"lower", b.lower},
                     {"upper", b.upper},
                     {"successes", b.successes},
                     {"trials", b.trials},
                     {"alpha", b.alpha}};
  }
  j["bounds"] = bounds;
  j["query_count"] = r.query_count;
  j["transport_failures"] = r.transport_failures;
  j["diagnostic"] = r.diagnostic;
  j["seed"] = r.seed;
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

// ---------------------------------------------------------------------------
// Exact enumeration oracle

namespace {

// Deterministic recovery for the exact path: single lexicon candidate, or the
// original token when the lexicon has none.
std::string recover_token(const std::string& token, const Lexicon& lexicon) {
  const auto* cands = lexicon.candidates(token);
  if (!cands || cands->empty()) return token;
  return (*cands)[0];
}

void check_deterministic_recovery(const Sentence& s, const Lexicon& lexicon) {
  for (const auto& token : s.tokens) {
    const auto* cands = lexicon.candidates(token);
    if (cands && cands->size() > 1)
      throw std::invalid_argument(
          "exact enumeration requires a deterministic recovery map; token '" + token +
          "' has " + std::to_string(cands->size()) + " candidates");
  }
}

}  // namespace

std::pair<std::map<std::string, long>, long> exact_vote_distribution(
    const Sentence& s, Classifier& model, double mask_rate, const Lexicon& lexicon) {
  validate_sentence(s);
  const long n = static_cast<long>(s.size());
  if (n > 12)
    throw std::invalid_argument("exact_vote_distribution: n must be <= 12");
  check_deterministic_recovery(s, lexicon);
  const long retain = retention_count(n, mask_rate);

  // Recovery depends only on the original token, so precompute it per position.
  std::vector<std::string> recovered(s.size());
  for (size_t i = 0; i < s.size(); ++i) recovered[i] = recover_token(s.tokens[i], lexicon);

  std::map<std::string, long> counts;
  long total = 0;
  Sentence variant = s;
  const auto evaluate = [&](uint32_t retain_mask) {
    for (size_t i = 0; i < s.size(); ++i) {
      variant.tokens[i] =
          (retain_mask >> i) & 1u ? s.tokens[i] : recovered[i];
    }
    counts[model.classify(variant)]++;
    ++total;
  };

  if (retain == 0) {
    evaluate(0);
  } else {
    const uint32_t limit = 1u << n;
    uint32_t v = (1u << retain) - 1;
    while (v < limit) {
      evaluate(v);
      const uint32_t c = v & (0u - v);
      const uint32_t r = v + c;
      v = (((r ^ v) >> 2) / c) | r;
    }
  }
  return {counts, total};
}

double exact_smoothed_prob(const Sentence& s, Classifier& model, double mask_rate,
                           const std::string& label, const Lexicon& lexicon) {
  const auto [counts, total] = exact_vote_distribution(s, model, mask_rate, lexicon);
  const auto it = counts.find(label);
  const long c = it == counts.end() ? 0 : it->second;
  return static_cast<double>(c) / static_cast<double>(total);
}

DriftBoundCheck verify_drift_bound(const Sentence& w, const Sentence& w_prime,
                              Classifier& model, double mask_rate,
                              const Lexicon& lexicon) {
  if (w.size() != w_prime.size())
    throw std::invalid_argument("verify_drift_bound: sentence lengths differ");
  DriftBoundCheck out;
  out.distance = hamming_distance(w, w_prime);

  const auto [counts_w, total] = exact_vote_distribution(w, model, mask_rate, lexicon);
  const auto [counts_wp, total2] =
      exact_vote_distribution(w_prime, model, mask_rate, lexicon);
  (void)total2;  // same n and s, so the same C(n,s)

  const long n = static_cast<long>(w.size());
  const long s = retention_count(n, mask_rate);
  const long d = out.distance;

  // Delta_d = (den - num) / den with num/den the telescoping products; for
  // n <= 12 these fit comfortably in 128-bit integers, so the verdict is an
  // exact rational comparison.
  __int128 num = 1, den = 1;
  if (d > n - s) {
    num = 0;
    den = 1;
  } else {
    for (long i = 0; i < d; ++i) {
      num *= n - s - i;
      den *= n - i;
    }
  }

  long max_diff = 0;
  std::set<std::string> labels;
  for (const auto& [label, c] : counts_w) labels.insert(label);
  for (const auto& [label, c] : counts_wp) labels.insert(label);
  bool holds = true;
  for (const auto& label : labels) {
    const auto itw = counts_w.find(label);
    const auto itp = counts_wp.find(label);
    const long cw = itw == counts_w.end() ? 0 : itw->second;
    const long cp = itp == counts_wp.end() ? 0 : itp->second;
    const long diff = std::abs(cw - cp);
    max_diff = std::max(max_diff, diff);
    // |diff|/total <= (den-num)/den  <=>  diff*den <= total*(den-num)
    if (static_cast<__int128>(diff) * den >
        static_cast<__int128>(total) * (den - num))
      holds = false;
  }
  out.lhs = static_cast<double>(max_diff) / static_cast<double>(total);
  out.rhs = delta_shift({n, s, d});
  out.holds = holds;
  return out;
}

}  // namespace clucert
