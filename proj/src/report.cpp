#include "clucert/report.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "clucert/rng.hpp"

namespace clucert {
namespace {

using Clock = std::chrono::steady_clock;

}  // namespace

RunSummary summarize(const std::vector<CertificationResult>& results,
                     double wall_time_s) {
  RunSummary s;
  s.n_records = static_cast<long>(results.size());
  s.wall_time_s = wall_time_s;

  std::vector<long> radii;
  for (const auto& r : results) {
    s.total_queries += r.query_count;
    if (r.diagnostic.rfind("error:", 0) == 0) ++s.n_failed;
    if (r.abstained) {
      ++s.n_abstained;
    } else {
      ++s.n_certified;
      radii.push_back(r.radius.radius);
    }
  }
  s.abstain_rate = s.n_records == 0
                       ? 0.0
                       : static_cast<double>(s.n_abstained) /
                             static_cast<double>(s.n_records);

  if (!radii.empty()) {
    double mean = 0.0;
    for (long r : radii) mean += static_cast<double>(r);
    mean /= static_cast<double>(radii.size());
    double var = 0.0;
    for (long r : radii) {
      const double d = static_cast<double>(r) - mean;
      var += d * d;
    }
    var /= static_cast<double>(radii.size());
    const double stddev = std::sqrt(var);
    s.r_avg = mean;
    s.coe = stddev == 0.0 ? 0.0 : stddev / mean;
  }

  if (s.n_records > 0) {
    long max_radius = 0;
    for (long r : radii) max_radius = std::max(max_radius, r);
    for (long delta = 0; delta <= max_radius + 1; ++delta) {
      long count = 0;
      for (const auto& r : results)
        if (!r.abstained && r.radius.radius >= delta) ++count;
      s.cert_acc_curve.emplace_back(
          delta, static_cast<double>(count) / static_cast<double>(s.n_records));
    }
  }
  return s;
}

RunOutput run_certification(const std::vector<DatasetRecord>& records,
                            const SmoothingConfig& config, const TaskSpec& task,
                            Classifier& model, ImportanceScorer& scorer,
                            const Lexicon& lexicon, SentenceEmbedder& embedder,
                            std::ostream* results_stream, bool include_timing,
                            int workers) {
  config.validate();
  if (workers < 1) throw std::invalid_argument("run_certification: workers must be >= 1");
  const auto start = Clock::now();

  RunOutput out;
  out.results.resize(records.size());
  std::vector<StageTimings> per_record_timings(records.size());
  std::mutex failures_mutex;

  const auto process = [&](size_t i) {
    const auto& rec = records[i];
    const uint64_t record_seed = derive_seed(config.master_seed, i);
    StageTimings* timings = &per_record_timings[i];
    CertificationResult result;
    try {
      const Sentence raw = tokenize_text(rec.text);
      RefinedSentence refined;
      long scorer_queries = 0;
      {
        const auto t0 = Clock::now();
        const long scorer_before = scorer.queries_used();
        refined = refine_with_scorer(raw, scorer, config.refine_length);
        scorer_queries = scorer.queries_used() - scorer_before;
        timings->refine += std::chrono::duration<double>(Clock::now() - t0).count();
      }
      result = certify(refined.sentence, rec.label, model, config, task.label_set,
                       lexicon, embedder, record_seed, rec.id, timings);
      result.query_count += scorer_queries;
    } catch (const std::exception& e) {
      result = CertificationResult{};
      result.input_id = rec.id;
      result.seed = record_seed;
      result.abstained = true;
      result.diagnostic = std::string("error: ") + e.what();
      std::lock_guard lk(failures_mutex);
      ++out.hard_failures;
    }
    out.results[i] = std::move(result);
  };

  if (workers == 1 || records.size() < 2) {
    for (size_t i = 0; i < records.size(); ++i) {
      process(i);
      if (results_stream)
        *results_stream << result_to_json(out.results[i], include_timing).dump() << '\n';
    }
  } else {
    // Pool over record indices; the stream writer emits in input order.
    std::mutex next_mutex;
    size_t next_index = 0;
    std::mutex write_mutex;
    std::condition_variable write_cv;
    size_t next_to_write = 0;
    std::map<size_t, bool> done;

    const auto worker = [&] {
      for (;;) {
        size_t i;
        {
          std::lock_guard lk(next_mutex);
          if (next_index >= records.size()) return;
          i = next_index++;
        }
        process(i);
        {
          std::lock_guard lk(write_mutex);
          done[i] = true;
        }
        write_cv.notify_all();
      }
    };
    std::vector<std::thread> pool;
    const int width = std::min<int>(workers, static_cast<int>(records.size()));
    pool.reserve(static_cast<size_t>(width));
    for (int w = 0; w < width; ++w) pool.emplace_back(worker);

    if (results_stream) {
      std::unique_lock lk(write_mutex);
      while (next_to_write < records.size()) {
        write_cv.wait(lk, [&] { return done.count(next_to_write) > 0; });
        while (next_to_write < records.size() && done.count(next_to_write)) {
          *results_stream
              << result_to_json(out.results[next_to_write], include_timing).dump()
              << '\n';
          ++next_to_write;
        }
      }
    }
    for (auto& t : pool) t.join();
  }

  for (const auto& t : per_record_timings) out.timings.add(t);
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  out.summary = summarize(out.results, wall);
  out.summary.n_failed = out.hard_failures;
  return out;
}

void write_summary_json(const RunSummary& s, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["n_records"] = s.n_records;
  j["n_certified"] = s.n_certified;
  j["n_abstained"] = s.n_abstained;
  j["n_failed"] = s.n_failed;
  if (s.r_avg.has_value())
    j["r_avg"] = *s.r_avg;
  else
    j["r_avg"] = nullptr;
  if (s.coe.has_value())
    j["coe"] = *s.coe;
  else
    j["coe"] = nullptr;
  j["abstain_rate"] = s.abstain_rate;
  j["radius_note"] =
      "r_avg and coe are over non-abstained records; abstentions count as radius "
      "-inf for cert_acc";
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [delta, acc] : s.cert_acc_curve)
    curve.push_back(nlohmann::json::array({delta, acc}));
  j["cert_acc_curve"] = curve;
  j["wall_time_s"] = s.wall_time_s;
  j["total_queries"] = s.total_queries;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

void write_curve_csv(const RunSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "delta,cert_acc\n";
  for (const auto& [delta, acc] : s.cert_acc_curve) out << delta << ',' << acc << '\n';
}

void write_timing_csv(const StageTimings& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "stage,seconds\n";
  out << "refine," << t.refine << '\n';
  out << "perturb," << t.perturb << '\n';
  out << "embed," << t.embed << '\n';
  out << "cluster," << t.cluster << '\n';
  out << "query," << t.query << '\n';
  out << "certify," << t.certify << '\n';
}

void emit_reports(const RunOutput& run, const std::string& out_dir,
                  bool write_results_jsonl, bool include_timing) {
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  if (write_results_jsonl) {
    std::ofstream out(path("results.jsonl"));
    if (!out) throw std::runtime_error("cannot write results.jsonl in " + out_dir);
    for (const auto& r : run.results)
      out << result_to_json(r, include_timing).dump() << '\n';
  }
  write_summary_json(run.summary, path("summary.json"));
  write_curve_csv(run.summary, path("cert_acc_curve.csv"));
  write_timing_csv(run.timings, path("timing.csv"));
}

RunSummary summarize_results_file(const std::string& results_path) {
  std::ifstream in(results_path);
  if (!in) throw std::runtime_error("cannot open " + results_path);
  std::vector<CertificationResult> results;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(results_path + " line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    CertificationResult r;
    r.input_id = j.value("input_id", "");
    r.abstained = j.value("outcome", "abstain") != "certified";
    if (!r.abstained) {
      r.radius.kind = RadiusOutcome::Kind::Certified;
      r.radius.radius = j.value("radius", 0L);
    }
    r.diagnostic = j.value("diagnostic", "");
    r.query_count = j.value("query_count", 0L);
    results.push_back(std::move(r));
  }
  return summarize(results, 0.0);
}

}  // namespace clucert
