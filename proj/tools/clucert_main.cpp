// clucert: certified l0 robustness radii for black-box text classifiers via
// clustering-guided denoising randomized smoothing.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "clucert/dataset.hpp"
#include "clucert/report.hpp"
#include "clucert/rng.hpp"

using namespace clucert;

namespace {

struct CommonOptions {
  SmoothingConfig config;
  std::string gamma_text = "fixed:1";
  bool no_cluster = false;
  std::string task_id = "sentiment2";
  std::string lexicon_path;
  bool fold_case = false;
  std::string stub_rule;
  std::string endpoint;
  std::string model_name;
  std::string cache_path;
  std::string embedder_kind = "offline";
  std::string embed_endpoint;
  std::string scorer_kind = "offline";
  size_t scorer_prompts = 0;
  std::string out_dir = "out";
  bool emit_timing = false;
  int workers = 1;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--task", opt.task_id, "Task: sentiment2, topic4 or math_numeric")
      ->check(CLI::IsMember({"sentiment2", "topic4", "math_numeric"}));
  cmd->add_option("--mask-rate", opt.config.mask_rate, "Mask rate m in [0,1]");
  cmd->add_option("--samples-n", opt.config.samples_predict, "Predict-round samples N");
  cmd->add_option("--samples-n-prime", opt.config.samples_certify,
                  "Certify-round samples N'");
  cmd->add_option("--alpha", opt.config.alpha, "Certification significance level");
  cmd->add_option("--gamma", opt.gamma_text, "Gamma policy: fixed:<v> or estimate");
  cmd->add_flag("--no-cluster", opt.no_cluster, "Disable clustering-guided denoising");
  cmd->add_option("--cluster-eps", opt.config.cluster.params.eps,
                  "DBSCAN cosine-distance radius");
  cmd->add_option("--cluster-min-samples", opt.config.cluster.params.min_samples,
                  "DBSCAN core-point threshold");
  cmd->add_option("--tau", opt.config.tau,
                  "Candidate similarity threshold; -1 disables scoring");
  cmd->add_option("--refine-length", opt.config.refine_length, "Refine target length L");
  cmd->add_flag("--bonferroni", opt.config.bonferroni,
                "Per-class intervals at alpha/|labels|");
  cmd->add_option("--seed", opt.config.master_seed, "Master seed");
  cmd->add_option("--lexicon", opt.lexicon_path, "Lexicon JSON path");
  cmd->add_flag("--fold-case", opt.fold_case, "Lowercase lexicon keys and candidates");
  cmd->add_option("--stub", opt.stub_rule,
                  "Offline stub classifier rule (constant:..., keyword:..., "
                  "position:..., lipschitz:...)");
  cmd->add_option("--endpoint", opt.endpoint, "Chat endpoint base URL");
  cmd->add_option("--model", opt.model_name, "Chat model name");
  cmd->add_option("--cache", opt.cache_path, "Persistent query cache (JSONL)");
  cmd->add_option("--embedder", opt.embedder_kind, "offline or remote")
      ->check(CLI::IsMember({"offline", "remote"}));
  cmd->add_option("--embed-endpoint", opt.embed_endpoint,
                  "Embedding endpoint base URL (remote embedder)");
  cmd->add_option("--scorer", opt.scorer_kind, "Importance scorer: offline or llm")
      ->check(CLI::IsMember({"offline", "llm"}));
  cmd->add_option("--scorer-prompts", opt.scorer_prompts,
                  "Number of importance prompts (0 = all)");
  cmd->add_option("--workers", opt.workers, "Record-level worker pool width");
}

std::string api_key_from_env() {
  const char* key = std::getenv("CLUCERT_API_KEY");
  return key ? key : "";
}

struct Pipeline {
  TaskSpec task;
  Lexicon lexicon;
  std::unique_ptr<SentenceEmbedder> embedder;
  std::unique_ptr<Classifier> classifier;
  std::unique_ptr<ChatTransport> transport;
  std::unique_ptr<QueryCache> cache;
  std::unique_ptr<ImportanceScorer> scorer;
};

Pipeline build_pipeline(CommonOptions& opt, bool need_classifier) {
  Pipeline p;
  p.task = make_task(opt.task_id);
  opt.config.gamma = GammaPolicy::parse(opt.gamma_text);
  if (opt.no_cluster) opt.config.cluster.enabled = false;

  if (!opt.lexicon_path.empty())
    p.lexicon = Lexicon::from_json_file(opt.lexicon_path, opt.fold_case);

  if (opt.embedder_kind == "remote") {
    if (opt.embed_endpoint.empty())
      throw CLI::ValidationError("--embed-endpoint is required with --embedder remote");
    RemoteEmbedderConfig cfg;
    cfg.endpoint = opt.embed_endpoint;
    cfg.api_key = api_key_from_env();
    p.embedder = std::make_unique<RemoteEmbedder>(cfg);
  } else {
    p.embedder = std::make_unique<OfflineHashEmbedder>();
  }

  if (!opt.cache_path.empty()) p.cache = std::make_unique<QueryCache>(opt.cache_path);

  if (!opt.stub_rule.empty()) {
    p.classifier = make_stub_classifier(opt.stub_rule);
  } else if (!opt.endpoint.empty()) {
    HttpTransportConfig cfg;
    cfg.endpoint = opt.endpoint;
    cfg.model = opt.model_name;
    cfg.api_key = api_key_from_env();
    p.transport = std::make_unique<HttpChatTransport>(cfg);
    p.classifier = std::make_unique<ChatClassifier>(p.task, *p.transport, p.cache.get());
  } else if (need_classifier) {
    throw CLI::ValidationError("either --stub or --endpoint/--model is required");
  }

  if (opt.scorer_kind == "llm") {
    if (!p.transport)
      throw CLI::ValidationError("--scorer llm requires --endpoint/--model");
    p.scorer = std::make_unique<LlmScorer>(*p.transport, p.cache.get(),
                                           opt.scorer_prompts);
  } else {
    p.scorer = std::make_unique<OfflineScorer>();
  }
  return p;
}

int cmd_certify(CommonOptions& opt, const std::string& dataset_path, long sample_n) {
  Pipeline p = build_pipeline(opt, true);
  auto records = load_dataset(dataset_path, p.task);
  if (sample_n >= 0)
    records = sample_records(std::move(records), sample_n, opt.config.master_seed);
  if (records.empty()) {
    std::cerr << "dataset is empty\n";
    return 1;
  }

  std::filesystem::create_directories(opt.out_dir);
  const auto results_path =
      (std::filesystem::path(opt.out_dir) / "results.jsonl").string();
  std::ofstream results_stream(results_path);
  if (!results_stream) {
    std::cerr << "cannot write " << results_path << "\n";
    return 1;
  }

  const auto run =
      run_certification(records, opt.config, p.task, *p.classifier, *p.scorer,
                        p.lexicon, *p.embedder, &results_stream, opt.emit_timing,
                        opt.workers);
  results_stream.close();
  emit_reports(run, opt.out_dir, /*write_results_jsonl=*/false, opt.emit_timing);

  const auto& s = run.summary;
  std::cout << "records:   " << s.n_records << "\n"
            << "certified: " << s.n_certified << "\n"
            << "abstained: " << s.n_abstained << "\n"
            << "failed:    " << s.n_failed << "\n";
  if (s.r_avg) std::cout << "r_avg:     " << *s.r_avg << "\n";
  if (s.coe) std::cout << "coe:       " << *s.coe << "\n";
  std::cout << "queries:   " << s.total_queries << "\n"
            << "wall:      " << s.wall_time_s << " s\n"
            << "reports:   " << opt.out_dir << "\n";
  return run.hard_failures > 0 ? 1 : 0;
}

int cmd_predict(CommonOptions& opt, const std::string& text) {
  Pipeline p = build_pipeline(opt, true);
  opt.config.validate();
  const Sentence raw = tokenize_text(text);
  const auto refined = refine_with_scorer(raw, *p.scorer, opt.config.refine_length);
  const auto out = predict(refined.sentence, *p.classifier, opt.config, p.lexicon,
                           *p.embedder, derive_seed(opt.config.master_seed, 0));
  nlohmann::json j;
  j["label"] = out.label;
  j["p_hat"] = out.p_hat;
  j["counts"] = out.votes.counts;
  j["retained"] = out.votes.retained_after_cluster;
  j["total_sampled"] = out.votes.total_sampled;
  j["cluster_filtered"] = out.votes.cluster_filtered;
  j["refined_length"] = refined.sentence.size();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_perturb(CommonOptions& opt, const std::string& text, long count) {
  Pipeline p = build_pipeline(opt, false);
  const Sentence s = tokenize_text(text);
  const auto batch = sample_batch(s, count, opt.config.mask_rate, p.lexicon,
                                  *p.embedder, opt.config.tau, opt.config.master_seed);
  for (const auto& sample : batch) {
    nlohmann::json j;
    j["tokens"] = sample.sentence.tokens;
    j["substituted_positions"] = sample.substituted_positions;
    j["seed"] = sample.origin_seed;
    std::cout << j.dump() << "\n";
  }
  return 0;
}

int cmd_report(const std::string& results_path, const std::string& out_dir) {
  const auto summary = summarize_results_file(results_path);
  std::filesystem::create_directories(out_dir);
  write_summary_json(summary, (std::filesystem::path(out_dir) / "summary.json").string());
  write_curve_csv(summary,
                  (std::filesystem::path(out_dir) / "cert_acc_curve.csv").string());
  std::cout << "records: " << summary.n_records
            << ", certified: " << summary.n_certified;
  if (summary.r_avg) std::cout << ", r_avg: " << *summary.r_avg;
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified l0 robustness for black-box text classifiers"};
  app.set_config("--config", "",
                 "TOML-style config file; keys live in a section named after "
                 "the verb, e.g. [certify]");
  app.require_subcommand(1);

  CommonOptions opt;
  std::string dataset_path, text, results_path;
  long sample_n = -1, perturb_count = 5;

  auto* certify_cmd = app.add_subcommand("certify", "Certify a dataset and emit reports");
  add_common_flags(certify_cmd, opt);
  certify_cmd->add_option("--dataset", dataset_path, "Dataset JSONL path")->required();
  certify_cmd->add_option("--sample-n", sample_n,
                          "Evaluate a deterministic subsample of this size");
  certify_cmd->add_option("--out", opt.out_dir, "Output directory");
  certify_cmd->add_flag("--emit-timing", opt.emit_timing,
                        "Include wall_time_s in results.jsonl (breaks byte-level "
                        "reproducibility)");

  auto* predict_cmd = app.add_subcommand("predict", "Smoothed prediction for one input");
  add_common_flags(predict_cmd, opt);
  predict_cmd->add_option("--text", text, "Input text")->required();

  auto* perturb_cmd =
      app.add_subcommand("perturb", "Dump perturbed samples for one input (debug)");
  add_common_flags(perturb_cmd, opt);
  perturb_cmd->add_option("--text", text, "Input text")->required();
  perturb_cmd->add_option("--n", perturb_count, "Number of samples");

  auto* report_cmd = app.add_subcommand("report", "Recompute summary from results.jsonl");
  report_cmd->add_option("--results", results_path, "results.jsonl path")->required();
  report_cmd->add_option("--out", opt.out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (certify_cmd->parsed()) return cmd_certify(opt, dataset_path, sample_n);
    if (predict_cmd->parsed()) return cmd_predict(opt, text);
    if (perturb_cmd->parsed()) return cmd_perturb(opt, text, perturb_count);
    if (report_cmd->parsed()) return cmd_report(results_path, opt.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
