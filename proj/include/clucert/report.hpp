#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clucert/dataset.hpp"
#include "clucert/engine.hpp"
#include "clucert/refine.hpp"

namespace clucert {

struct RunSummary {
  long n_records = 0;
  long n_certified = 0;
  long n_abstained = 0;
  long n_failed = 0;  // per-record hard failures (recorded, run continues)
  std::optional<double> r_avg;  // mean radius over certified records
  std::optional<double> coe;    // std/mean of those radii; 0 when all equal
  double abstain_rate = 0.0;
  // CertAcc(delta) over all evaluated inputs; abstains never satisfy r >= delta.
  std::vector<std::pair<long, double>> cert_acc_curve;
  double wall_time_s = 0.0;
  long total_queries = 0;
};

RunSummary summarize(const std::vector<CertificationResult>& results,
                     double wall_time_s);

struct RunOutput {
  std::vector<CertificationResult> results;
  RunSummary summary;
  StageTimings timings;
  long hard_failures = 0;
};

// Batch driver: per record, tokenize -> refine -> certify, streaming one JSON
// line per result to results_stream (when given) in input order. workers > 1
// fans records out to a pool; per-record seeds derive from (master_seed,
// record index), so output is identical for any worker count.
RunOutput run_certification(const std::vector<DatasetRecord>& records,
                            const SmoothingConfig& config, const TaskSpec& task,
                            Classifier& model, ImportanceScorer& scorer,
                            const Lexicon& lexicon, SentenceEmbedder& embedder,
                            std::ostream* results_stream = nullptr,
                            bool include_timing = false, int workers = 1);

// Writes summary.json, cert_acc_curve.csv and timing.csv (and results.jsonl
// unless it was already streamed) under out_dir.
void emit_reports(const RunOutput& run, const std::string& out_dir,
                  bool write_results_jsonl = true, bool include_timing = false);

// Rebuilds a summary from an existing results.jsonl (the `report` verb).
RunSummary summarize_results_file(const std::string& results_path);

void write_summary_json(const RunSummary& summary, const std::string& path);
void write_curve_csv(const RunSummary& summary, const std::string& path);
void write_timing_csv(const StageTimings& timings, const std::string& path);

}  // namespace clucert
