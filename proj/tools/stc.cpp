// stc — synthetic test collection toolkit.
//
// Subcommands cover the artifact pipeline (sample, filter, genq, pool,
// judge, eval, compare, agreement, stats) plus `pipeline`, which runs the
// whole chain from one config file with resumable, manifest-tracked stages.
//
// Exit codes: 0 success, 1 usage/config, 2 data/parse, 3 backend.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stc/config.hpp"
#include "stc/corpus.hpp"
#include "stc/filtering.hpp"
#include "stc/genbackend.hpp"
#include "stc/judging.hpp"
#include "stc/metaeval.hpp"
#include "stc/metrics.hpp"
#include "stc/pipeline.hpp"
#include "stc/pooling.hpp"
#include "stc/querygen.hpp"
#include "stc/reports.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  bool offline = false;
  uint64_t seed = 0;
  std::string cache_path;
};

struct BackendFlags {
  std::string model = "gpt-4";
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  double top_p = 1.0;
  double frequency_penalty = 0.5;
  double presence_penalty = 0.0;
  int max_tokens = 256;
  int inflight = 4;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", model, "Model tag sent to the endpoint");
    cmd->add_option("--endpoint", endpoint, "Chat-completions endpoint URL");
    cmd->add_option("--api-key-env", api_key_env, "Env var holding the bearer token");
    cmd->add_option("--temperature", temperature, "Sampling temperature");
    cmd->add_option("--top-p", top_p, "Nucleus sampling cutoff");
    cmd->add_option("--frequency-penalty", frequency_penalty, "Frequency penalty");
    cmd->add_option("--presence-penalty", presence_penalty, "Presence penalty");
    cmd->add_option("--max-tokens", max_tokens, "Response token budget");
    cmd->add_option("--inflight", inflight, "Max concurrent requests");
  }

  stc::GenerationConfig to_config(bool offline) const {
    stc::GenerationConfig cfg;
    cfg.model_tag = offline ? "mock" : model;
    cfg.endpoint_url = endpoint;
    cfg.api_key_env = api_key_env;
    cfg.temperature = temperature;
    cfg.top_p = top_p;
    cfg.frequency_penalty = frequency_penalty;
    cfg.presence_penalty = presence_penalty;
    cfg.max_output_tokens = max_tokens;
    cfg.validate();
    return cfg;
  }
};

stc::CorpusFormat parse_format(const std::string& f) {
  std::string t = stc::to_lower(f);
  if (t == "jsonl") return stc::CorpusFormat::Jsonl;
  if (t == "tsv") return stc::CorpusFormat::Tsv;
  throw stc::ConfigError("corpus format must be jsonl or tsv");
}

std::vector<stc::Passage> load_corpus_file(const std::string& path, const std::string& format) {
  std::ifstream in(path);
  if (!in) throw stc::DataError("cannot open corpus file: " + path);
  return stc::parse_corpus(in, parse_format(format));
}

std::vector<stc::Query> load_queries_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw stc::DataError("cannot open query file: " + path);
  return stc::parse_queries(in);
}

stc::JudgmentSet load_qrels_file(const std::string& path, stc::JudgmentSource source,
                                 std::string model_tag = {}) {
  std::ifstream in(path);
  if (!in) throw stc::DataError("cannot open qrels file: " + path);
  return stc::parse_qrels(in, source, std::move(model_tag));
}

std::vector<stc::RunTable> load_run_files(const std::vector<std::string>& paths) {
  std::vector<stc::RunTable> runs;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw stc::DataError("cannot open run file: " + p);
    runs.push_back(stc::parse_run(in));
  }
  return runs;
}

std::ofstream open_out(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw stc::Error("cannot open for writing: " + path);
  return out;
}

// Backend factory shared by filter/genq/judge. The mock needs collection
// term statistics; callers pass the corpus the command already reads.
std::unique_ptr<stc::GenerationBackend> make_backend(
    const GlobalOptions& global, const BackendFlags& flags,
    std::unique_ptr<stc::ResponseCache>& cache_holder,
    const std::vector<stc::Passage>& stats_corpus) {
  if (global.offline)
    return std::make_unique<stc::MockBackend>(
        global.seed, stc::CollectionStats::from_passages(stats_corpus));
  cache_holder = std::make_unique<stc::ResponseCache>(global.cache_path);
  stc::BackendOptions options;
  options.max_inflight = flags.inflight;
  return std::make_unique<stc::HttpBackend>(*cache_holder, options);
}

int dispatch(int argc, char** argv) {
  CLI::App app{"synthetic test collection toolkit"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_flag("--offline", global.offline, "Use the deterministic offline mock backend");
  app.add_option("--seed", global.seed, "Seed for sampling and the mock backend");
  app.add_option("--cache", global.cache_path, "Response cache file (JSONL, append-only)");

  // --- sample ---------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "Draw a seeded random passage sample");
  std::string sample_in, sample_out, sample_format = "jsonl";
  size_t sample_n = 0;
  sample->add_option("--in", sample_in, "Corpus file")->required();
  sample->add_option("--format", sample_format, "Corpus format: jsonl or tsv");
  sample->add_option("--n", sample_n, "Sample size")->required();
  sample->add_option("--out", sample_out, "Output corpus file (jsonl)")->required();
  sample->callback([&] {
    auto corpus = load_corpus_file(sample_in, sample_format);
    auto picked = stc::sample_passages(corpus, sample_n, global.seed);
    auto out = open_out(sample_out);
    stc::write_corpus(picked, out);
    std::cout << "sampled " << picked.size() << " of " << corpus.size() << " passages\n";
  });

  // --- filter ---------------------------------------------------------------
  auto* filter = app.add_subcommand("filter", "Quality-score passages and drop weak ones");
  std::string filter_in, filter_prompt, filter_out, filter_report, filter_format = "jsonl";
  size_t filter_n = 0;
  int filter_threshold = 50;
  BackendFlags filter_backend;
  filter->add_option("--in", filter_in, "Corpus file")->required();
  filter->add_option("--format", filter_format, "Corpus format: jsonl or tsv");
  filter->add_option("--n", filter_n, "Sample this many passages first (0 = all)");
  filter->add_option("--threshold", filter_threshold, "Keep scores >= threshold");
  filter->add_option("--prompt", filter_prompt, "Quality prompt template")->required();
  filter->add_option("--out", filter_out, "Kept passages (jsonl)")->required();
  filter->add_option("--report", filter_report, "Filter report JSON");
  filter_backend.add_to(filter);
  filter->callback([&] {
    auto corpus = load_corpus_file(filter_in, filter_format);
    auto passages =
        filter_n > 0 ? stc::sample_passages(corpus, filter_n, global.seed) : corpus;
    std::unique_ptr<stc::ResponseCache> cache;
    auto backend = make_backend(global, filter_backend, cache, corpus);
    std::string prompt = stc::read_file(filter_prompt);
    auto scores = stc::score_passages(passages, *backend, filter_backend.to_config(global.offline),
                                      prompt, filter_backend.inflight);
    auto outcome = stc::filter_passages(scores, filter_threshold);
    std::set<std::string> kept(outcome.kept.begin(), outcome.kept.end());
    std::vector<stc::Passage> kept_passages;
    for (const auto& p : passages)
      if (kept.count(p.pid)) kept_passages.push_back(p);
    auto out = open_out(filter_out);
    stc::write_corpus(kept_passages, out);

    double total = scores.empty() ? 1.0 : static_cast<double>(scores.size());
    nlohmann::json report;
    report["input"] = scores.size();
    report["threshold"] = filter_threshold;
    report["kept"] = outcome.kept.size();
    report["dropped_malformed"] = outcome.dropped_malformed.size();
    report["dropped_lowscore"] = outcome.dropped_lowscore.size();
    report["malformed_pct"] = 100.0 * static_cast<double>(outcome.dropped_malformed.size()) / total;
    report["lowscore_pct"] = 100.0 * static_cast<double>(outcome.dropped_lowscore.size()) / total;
    report["reference"] = {{"malformed_pct", 8.9}, {"lowscore_pct", 14.6}};
    if (!filter_report.empty()) {
      nlohmann::json details = nlohmann::json::array();
      for (const auto& sc : scores) {
        nlohmann::json d;
        d["pid"] = sc.pid;
        d["malformed"] = sc.malformed;
        if (!sc.malformed) d["score"] = sc.score;
        details.push_back(d);
      }
      report["scores"] = details;
      stc::write_file(filter_report, report.dump(2) + "\n");
    }
    std::cout << "kept " << outcome.kept.size() << "/" << scores.size() << "  malformed "
              << report["malformed_pct"].get<double>() << "% (reference 8.9%)  lowscore "
              << report["lowscore_pct"].get<double>() << "% (reference 14.6%)\n";
  });

  // --- genq -----------------------------------------------------------------
  auto* genq = app.add_subcommand("genq", "Generate one query per seed passage");
  std::string genq_in, genq_prompt, genq_tag = "llm", genq_out, genq_report, genq_qrels,
              genq_reject, genq_format = "jsonl";
  int genq_min_rel = 1;
  int genq_max_rel = -1;
  BackendFlags genq_backend;
  genq->add_option("--in", genq_in, "Seed passages (kept.jsonl)")->required();
  genq->add_option("--format", genq_format, "Corpus format: jsonl or tsv");
  genq->add_option("--prompt", genq_prompt, "Query prompt template")->required();
  genq->add_option("--tag", genq_tag, "Generator tag recorded as query origin");
  genq->add_option("--out", genq_out, "Output query TSV")->required();
  genq->add_option("--report", genq_report, "Generation report JSON");
  genq->add_option("--qrels", genq_qrels, "Judgments for the acceptance filter");
  genq->add_option("--min-rel", genq_min_rel, "Reject queries with fewer relevant docs");
  genq->add_option("--max-rel", genq_max_rel, "Reject queries with more relevant docs (-1 = off)");
  genq->add_option("--reject", genq_reject, "File of qids to reject manually");
  genq_backend.add_to(genq);
  genq->callback([&] {
    auto passages = load_corpus_file(genq_in, genq_format);
    std::unique_ptr<stc::ResponseCache> cache;
    auto backend = make_backend(global, genq_backend, cache, passages);
    std::string prompt = stc::read_file(genq_prompt);
    auto outcome = stc::generate_queries(passages, *backend, genq_backend.to_config(global.offline),
                                         prompt, genq_tag, genq_backend.inflight);
    for (const auto& [pid, err] : outcome.failures)
      std::cerr << "genq: passage " << pid << " failed: " << err << "\n";

    std::vector<std::string> manual;
    if (!genq_reject.empty()) {
      std::ifstream in(genq_reject);
      if (!in) throw stc::DataError("cannot open reject list: " + genq_reject);
      std::string line;
      while (std::getline(in, line))
        if (!stc::trim(line).empty()) manual.push_back(stc::trim(line));
    }
    std::optional<stc::JudgmentSet> judgments;
    if (!genq_qrels.empty())
      judgments = load_qrels_file(genq_qrels, stc::JudgmentSource::Human);
    auto filtered = stc::apply_acceptance(
        outcome.queries, judgments, genq_min_rel,
        genq_max_rel >= 0 ? std::optional<int>(genq_max_rel) : std::nullopt, manual);

    std::vector<stc::Query> accepted;
    std::map<std::string, int64_t> reasons;
    for (const auto& gq : filtered) {
      if (gq.accepted)
        accepted.push_back(gq.query);
      else
        ++reasons[stc::reject_reason_name(*gq.rejection)];
    }
    auto out = open_out(genq_out);
    stc::write_queries(accepted, out);
    if (!genq_report.empty()) {
      nlohmann::json report;
      report["generated"] = outcome.queries.size();
      report["accepted"] = accepted.size();
      report["failed"] = outcome.failures.size();
      nlohmann::json rj;
      for (const auto& [reason, count] : reasons) rj[reason] = count;
      report["rejected"] = rj;
      stc::write_file(genq_report, report.dump(2) + "\n");
    }
    std::cout << "generated " << outcome.queries.size() << " queries, accepted "
              << accepted.size() << ", failed " << outcome.failures.size() << "\n";
  });

  // --- pool -----------------------------------------------------------------
  auto* pool_cmd = app.add_subcommand("pool", "Depth-k pooling over run files");
  std::vector<std::string> pool_runs;
  std::string pool_queries, pool_out;
  int pool_depth = 10;
  pool_cmd->add_option("--runs", pool_runs, "Run files")->required()->expected(-1);
  pool_cmd->add_option("--queries", pool_queries, "Query TSV; its qids define the pool")
      ->required();
  pool_cmd->add_option("--depth", pool_depth, "Pool depth");
  pool_cmd->add_option("--out", pool_out, "Pool TSV (qid, docid)")->required();
  pool_cmd->callback([&] {
    auto runs = load_run_files(pool_runs);
    auto queries = load_queries_file(pool_queries);
    std::vector<std::string> qids;
    for (const auto& q : queries) qids.push_back(q.qid);
    auto pool = stc::build_pool(runs, qids, pool_depth);
    auto out = open_out(pool_out);
    stc::write_pool(pool, out);
    std::cout << "pooled " << pool.pairs.size() << " pairs from " << runs.size()
              << " runs at depth " << pool_depth << "\n";
  });

  // --- judge ----------------------------------------------------------------
  auto* judge = app.add_subcommand("judge", "Produce judgments: sparse, llm or import");
  std::string judge_mode, judge_pool, judge_queries, judge_corpus, judge_prompt, judge_out,
      judge_in, judge_exceptions, judge_format = "jsonl";
  BackendFlags judge_backend;
  judge->add_option("--mode", judge_mode, "sparse | llm | import")->required();
  judge->add_option("--pool", judge_pool, "Pool TSV");
  judge->add_option("--queries", judge_queries, "Query TSV");
  judge->add_option("--corpus", judge_corpus, "Corpus with the pooled passages");
  judge->add_option("--format", judge_format, "Corpus format: jsonl or tsv");
  judge->add_option("--prompt", judge_prompt, "Judgment prompt template");
  judge->add_option("--in", judge_in, "Existing qrels file (import mode)");
  judge->add_option("--out", judge_out, "Output qrels file")->required();
  judge->add_option("--exceptions", judge_exceptions, "Flagged/failed pairs JSON");
  judge_backend.add_to(judge);
  judge->callback([&] {
    std::string mode = stc::to_lower(judge_mode);
    if (mode == "import") {
      if (judge_in.empty()) throw stc::ConfigError("import mode needs --in");
      auto set = load_qrels_file(judge_in, stc::JudgmentSource::Human);
      auto out = open_out(judge_out);
      stc::write_qrels(set, out);
      std::cout << "imported " << set.entries.size() << " judgments\n";
      return;
    }
    if (judge_pool.empty() || judge_queries.empty())
      throw stc::ConfigError(mode + " mode needs --pool and --queries");
    std::ifstream pin(judge_pool);
    if (!pin) throw stc::DataError("cannot open pool file: " + judge_pool);
    auto pool = stc::parse_pool(pin);
    auto queries = load_queries_file(judge_queries);
    if (mode == "sparse") {
      auto set = stc::sparse_judgments(queries, pool);
      auto out = open_out(judge_out);
      stc::write_qrels(set, out);
      std::cout << "sparse judgments for " << set.entries.size() << " pairs\n";
      return;
    }
    if (mode != "llm") throw stc::ConfigError("unknown judge mode \"" + judge_mode + "\"");
    if (judge_corpus.empty() || judge_prompt.empty())
      throw stc::ConfigError("llm mode needs --corpus and --prompt");
    auto corpus = load_corpus_file(judge_corpus, judge_format);
    std::map<std::string, const stc::Passage*> by_pid;
    for (const auto& p : corpus) by_pid[p.pid] = &p;
    std::map<std::string, const stc::Query*> by_qid;
    for (const auto& q : queries) by_qid[q.qid] = &q;
    std::vector<std::pair<stc::Query, stc::Passage>> pairs;
    for (const auto& [qid, docid] : pool.pairs) {
      auto q = by_qid.find(qid);
      if (q == by_qid.end()) throw stc::DataError("pooled qid not in query set: " + qid);
      auto p = by_pid.find(docid);
      if (p == by_pid.end()) throw stc::DataError("pooled docid not in corpus: " + docid);
      pairs.emplace_back(*q->second, *p->second);
    }
    std::unique_ptr<stc::ResponseCache> cache;
    auto backend = make_backend(global, judge_backend, cache, corpus);
    std::string prompt = stc::read_file(judge_prompt);
    auto outcome = stc::llm_judge(pairs, *backend, judge_backend.to_config(global.offline),
                                  prompt, judge_backend.inflight);
    auto out = open_out(judge_out);
    stc::write_qrels(outcome.judgments, out);
    if (!judge_exceptions.empty()) {
      nlohmann::json j;
      nlohmann::json flagged = nlohmann::json::array();
      for (const auto& key : outcome.flagged) flagged.push_back({key.first, key.second});
      j["flagged"] = flagged;
      nlohmann::json failures = nlohmann::json::array();
      for (const auto& [key, err] : outcome.failures)
        failures.push_back({{"qid", key.first}, {"docid", key.second}, {"error", err}});
      j["failures"] = failures;
      stc::write_file(judge_exceptions, j.dump(2) + "\n");
    }
    std::cout << "judged " << outcome.judgments.entries.size() << " pairs, flagged "
              << outcome.flagged.size() << ", failed " << outcome.failures.size() << "\n";
    if (!outcome.failures.empty())
      throw stc::BackendError(std::to_string(outcome.failures.size()) + " pairs failed judging");
  });

  // --- eval -----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Score runs against judgments");
  std::vector<std::string> eval_runs;
  std::string eval_qrels, eval_queries, eval_metric = "ndcg@10", eval_gain = "exponential",
              eval_origin = "all", eval_out;
  int eval_ap_threshold = 2;
  bool eval_skip_empty = false;
  eval_cmd->add_option("--runs", eval_runs, "Run files")->required()->expected(-1);
  eval_cmd->add_option("--qrels", eval_qrels, "Judgments file")->required();
  eval_cmd->add_option("--queries", eval_queries, "Query TSV; defines the evaluated qids")
      ->required();
  eval_cmd->add_option("--metric", eval_metric, "ndcg@K or ap");
  eval_cmd->add_option("--gain", eval_gain, "NDCG gain: exponential or linear");
  eval_cmd->add_option("--ap-threshold", eval_ap_threshold, "AP binarization grade");
  eval_cmd->add_flag("--skip-empty", eval_skip_empty, "Exclude zero-relevant qids from means");
  eval_cmd->add_option("--origin", eval_origin,
                       "Evaluate all | real | generated | <generator tag> queries");
  eval_cmd->add_option("--out", eval_out, "Eval CSV")->required();
  eval_cmd->callback([&] {
    auto runs = load_run_files(eval_runs);
    auto judgments = load_qrels_file(eval_qrels, stc::JudgmentSource::Human);
    auto queries = load_queries_file(eval_queries);
    std::vector<std::string> qids;
    for (const auto& q : queries) {
      std::string origin = q.is_real() ? "real" : *q.generator;
      bool selected = eval_origin == "all" || eval_origin == origin ||
                      (eval_origin == "generated" && !q.is_real());
      if (selected) qids.push_back(q.qid);
    }
    auto spec = stc::MetricSpec::parse(eval_metric);
    std::string gain = stc::to_lower(eval_gain);
    if (gain == "linear")
      spec.gain = stc::GainKind::Linear;
    else if (gain != "exponential")
      throw stc::ConfigError("--gain must be exponential or linear");
    spec.binary_threshold = eval_ap_threshold;
    spec.skip_empty = eval_skip_empty;
    auto results = stc::evaluate_all(runs, judgments, qids, spec);
    auto out = open_out(eval_out);
    stc::write_eval_csv(results, out);
    for (const auto& r : results)
      std::cout << r.run_tag << " " << r.metric << " " << stc::detail::fixed6(r.mean) << "\n";
  });

  // --- compare --------------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "Kendall tau + scatter + bias across conditions");
  std::string cmp_a, cmp_b, cmp_cats, cmp_out, cmp_report;
  bool cmp_tau_a = false;
  compare->add_option("--eval-a", cmp_a, "Eval CSV for condition A")->required();
  compare->add_option("--eval-b", cmp_b, "Eval CSV for condition B")->required();
  compare->add_option("--categories", cmp_cats, "run_tag,category sidecar CSV");
  compare->add_option("--out", cmp_out, "Scatter CSV");
  compare->add_option("--report", cmp_report, "Bias report JSON");
  compare->add_flag("--tau-a", cmp_tau_a, "Use tau-a instead of tie-corrected tau-b");
  compare->callback([&] {
    auto read_cond = [](const std::string& path, const char* name) {
      std::ifstream in(path);
      if (!in) throw stc::DataError(std::string("cannot open eval csv: ") + path);
      stc::ConditionScores cs;
      cs.condition_name = name;
      cs.scores = stc::read_eval_means(in);
      return cs;
    };
    auto a = read_cond(cmp_a, "a");
    auto b = read_cond(cmp_b, "b");
    std::map<std::string, stc::SystemCategory> categories;
    if (!cmp_cats.empty()) {
      std::ifstream in(cmp_cats);
      if (!in) throw stc::DataError("cannot open categories file: " + cmp_cats);
      categories = stc::parse_categories_csv(in);
    }
    auto report = stc::compare_conditions(a, b, categories,
                                          cmp_tau_a ? stc::TauVariant::A : stc::TauVariant::B);
    if (!cmp_out.empty()) {
      auto out = open_out(cmp_out);
      stc::write_scatter_csv(report, out);
    }
    if (!cmp_report.empty()) stc::write_file(cmp_report, stc::bias_json(report).dump(2) + "\n");
    std::cout << "tau " << (cmp_tau_a ? "(tau-a) " : "(tau-b) ") << report.tau << " over "
              << report.rows.size() << " runs\n";
  });

  // --- agreement --------------------------------------------------------------
  auto* agreement = app.add_subcommand("agreement", "Confusion matrix and Cohen's kappa");
  std::string agr_a, agr_b, agr_matrix, agr_qids, agr_out;
  bool agr_weighted = false;
  agreement->add_option("--qrels-a", agr_a, "First judgment file");
  agreement->add_option("--qrels-b", agr_b, "Second judgment file");
  agreement->add_option("--matrix", agr_matrix, "Precomputed 4x4 matrix JSON (rows grade 3..0)");
  agreement->add_option("--qids", agr_qids, "Restrict to qids listed in this file");
  agreement->add_option("--out", agr_out, "Agreement report JSON");
  agreement->add_flag("--weighted", agr_weighted, "Linear-weighted kappa (sensitivity only)");
  agreement->callback([&] {
    stc::ConfusionMatrix matrix;
    int64_t only_a = 0, only_b = 0;
    if (!agr_matrix.empty()) {
      matrix = stc::parse_matrix_json(stc::read_file(agr_matrix));
    } else {
      if (agr_a.empty() || agr_b.empty())
        throw stc::ConfigError("agreement needs --matrix or both --qrels-a and --qrels-b");
      auto a = load_qrels_file(agr_a, stc::JudgmentSource::Human);
      auto b = load_qrels_file(agr_b, stc::JudgmentSource::Human);
      std::vector<std::string> qids;
      if (!agr_qids.empty()) {
        std::ifstream in(agr_qids);
        if (!in) throw stc::DataError("cannot open qids file: " + agr_qids);
        std::string line;
        while (std::getline(in, line))
          if (!stc::trim(line).empty()) qids.push_back(stc::trim(line));
      }
      auto build = stc::build_confusion(a, b, qids);
      matrix = build.matrix;
      only_a = build.only_in_a;
      only_b = build.only_in_b;
    }
    auto report = stc::cohen_kappa(
        matrix, agr_weighted ? stc::KappaWeighting::Linear : stc::KappaWeighting::None);
    auto j = stc::agreement_json(report, only_a, only_b);
    if (!agr_out.empty()) stc::write_file(agr_out, j.dump(2) + "\n");
    std::cout << "kappa " << report.kappa << "  po " << report.observed_agreement << "  pe "
              << report.expected_agreement << "  n " << report.matrix.total() << "\n";
  });

  // --- stats ------------------------------------------------------------------
  auto* stats = app.add_subcommand("stats", "Query length table; grade table with --qrels/--pool");
  std::string stats_queries, stats_qrels, stats_pool, stats_json;
  stats->add_option("--queries", stats_queries, "Query TSV")->required();
  stats->add_option("--qrels", stats_qrels, "Judgments for the grade table");
  stats->add_option("--pool", stats_pool, "Pool TSV for the grade table");
  stats->add_option("--json", stats_json, "Write the same numbers as JSON");
  stats->callback([&] {
    auto queries = load_queries_file(stats_queries);
    auto qstats = stc::query_stats(queries);
    stc::print_query_stats(qstats, std::cout);
    nlohmann::json j;
    j["queries"] = stc::query_stats_json(qstats);
    if (!stats_qrels.empty() && !stats_pool.empty()) {
      auto judgments = load_qrels_file(stats_qrels, stc::JudgmentSource::Human);
      std::ifstream pin(stats_pool);
      if (!pin) throw stc::DataError("cannot open pool file: " + stats_pool);
      auto pool = stc::parse_pool(pin);
      auto gstats = stc::pool_grade_stats(pool, judgments, queries);
      std::cout << "\n";
      stc::print_grade_stats(gstats, std::cout);
      j["grades"] = stc::grade_stats_json(gstats);
    } else if (!stats_qrels.empty() || !stats_pool.empty()) {
      throw stc::ConfigError("grade stats need both --qrels and --pool");
    }
    if (!stats_json.empty()) stc::write_file(stats_json, j.dump(2) + "\n");
  });

  // --- pipeline ---------------------------------------------------------------
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from a config file");
  std::string pipe_config, pipe_out;
  pipeline->add_option("--config", pipe_config, "Pipeline config file")->required();
  pipeline->add_option("--out", pipe_out, "Artifact directory (overrides pipeline.out)");
  pipeline->callback([&] {
    std::ifstream in(pipe_config);
    if (!in) throw stc::ConfigError("cannot open config file: " + pipe_config);
    stc::PipelineSettings settings;
    settings.config = stc::Config::parse(in);
    settings.config_dir = fs::path(pipe_config).parent_path();
    std::string out_value = !pipe_out.empty()
                                ? pipe_out
                                : settings.config.get_or("pipeline.out", "artifacts");
    fs::path out_path(out_value);
    settings.out_dir =
        !pipe_out.empty() || out_path.is_absolute() ? out_path : settings.config_dir / out_path;
    settings.offline = global.offline;
    if (app.count("--seed") > 0) settings.seed_override = global.seed;
    if (app.count("--cache") > 0) settings.cache_override = global.cache_path;
    settings.log = &std::cerr;
    auto result = stc::run_pipeline(std::move(settings));
    std::cout << "pipeline complete: " << result.stages_run.size() << " stages run, "
              << result.stages_reused.size() << " reused, artifacts in "
              << result.out_dir.generic_string() << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const stc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const stc::BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const stc::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const stc::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
