#pragma once

// Retrieval effectiveness over (RunTable, JudgmentSet): NDCG@k and average
// precision, per query and averaged. Rankings are always the canonical
// (score desc, docid asc) order maintained by RunTable.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "stc/common.hpp"
#include "stc/corpus.hpp"

namespace stc {

enum class GainKind { Exponential, Linear };

struct EvalResult {
  std::string run_tag;
  std::string metric;
  std::map<std::string, double> per_query;
  double mean = 0.0;
};

struct MetricSpec {
  enum class Kind { Ndcg, AveragePrecision } kind = Kind::Ndcg;
  int k = 10;                               // NDCG cutoff
  GainKind gain = GainKind::Exponential;    // NDCG gain function
  int binary_threshold = 2;                 // AP: relevant iff grade >= threshold
  bool skip_empty = false;                  // drop zero-relevant qids from the mean

  static MetricSpec parse(const std::string& name) {
    MetricSpec spec;
    std::string t = to_lower(trim(name));
    if (t == "ap") {
      spec.kind = Kind::AveragePrecision;
      return spec;
    }
    if (t.rfind("ndcg@", 0) == 0) {
      long k = 0;
      try {
        k = std::stol(t.substr(5));
      } catch (const std::exception&) {
        throw ConfigError("bad metric \"" + name + "\"");
      }
      if (k < 1) throw ConfigError("bad metric cutoff in \"" + name + "\"");
      spec.kind = Kind::Ndcg;
      spec.k = static_cast<int>(k);
      return spec;
    }
    throw ConfigError("unknown metric \"" + name + "\" (expected ndcg@K or ap)");
  }

  std::string label() const {
    if (kind == Kind::AveragePrecision) return "ap";
    return "ndcg@" + std::to_string(k);
  }
};

namespace detail {

inline double gain_of(Grade g, GainKind kind) {
  int r = grade_value(g);
  if (kind == GainKind::Linear) return static_cast<double>(r);
  return std::pow(2.0, r) - 1.0;
}

inline double mean_of(const std::map<std::string, double>& per_query) {
  if (per_query.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [qid, v] : per_query) sum += v;
  return sum / static_cast<double>(per_query.size());
}

}  // namespace detail

// NDCG@k with gains 2^r - 1 (exponential, the default) or r (linear).
// Unjudged documents count as grade 0. The ideal DCG comes from the judgment
// set's grades for the qid sorted descending and truncated at k. A qid whose
// judged grades are all zero (or that has no judgments) scores 0 and is
// counted in the mean unless skip_empty is set.
inline EvalResult ndcg_at_k(const RunTable& run, const JudgmentSet& judgments,
                            const std::vector<std::string>& qids, int k,
                            GainKind gain = GainKind::Exponential,
                            bool skip_empty = false) {
  if (k < 1) throw DataError("ndcg: cutoff k must be >= 1");
  EvalResult result;
  result.run_tag = run.run_tag;
  result.metric = "ndcg@" + std::to_string(k);
  for (const auto& qid : qids) {
    std::vector<Grade> judged = judgments.grades_for(qid);
    std::sort(judged.begin(), judged.end(),
              [](Grade a, Grade b) { return grade_value(a) > grade_value(b); });
    double idcg = 0.0;
    for (size_t i = 0; i < judged.size() && i < static_cast<size_t>(k); ++i)
      idcg += detail::gain_of(judged[i], gain) / std::log2(static_cast<double>(i) + 2.0);
    if (idcg <= 0.0) {
      if (!skip_empty) result.per_query[qid] = 0.0;
      continue;
    }
    auto [begin, end] = run.ranking(qid);
    double dcg = 0.0;
    int pos = 0;
    for (const RunEntry* e = begin; e != end && pos < k; ++e) {
      ++pos;
      auto g = judgments.grade(qid, e->docid);
      if (g) dcg += detail::gain_of(*g, gain) / std::log2(static_cast<double>(pos) + 1.0);
    }
    result.per_query[qid] = dcg / idcg;
  }
  result.mean = detail::mean_of(result.per_query);
  return result;
}

// Average precision over the full ranking depth with binary relevance
// grade >= binary_threshold. The divisor R is the total number of relevant
// documents in the judgments for the qid, retrieved or not; R = 0 scores 0.
inline EvalResult average_precision(const RunTable& run, const JudgmentSet& judgments,
                                    const std::vector<std::string>& qids,
                                    int binary_threshold = 2, bool skip_empty = false) {
  if (binary_threshold < 1 || binary_threshold > 3)
    throw DataError("ap: binary threshold must be in 1..3");
  EvalResult result;
  result.run_tag = run.run_tag;
  result.metric = "ap";
  for (const auto& qid : qids) {
    long total_relevant = 0;
    for (Grade g : judgments.grades_for(qid))
      if (grade_value(g) >= binary_threshold) ++total_relevant;
    if (total_relevant == 0) {
      if (!skip_empty) result.per_query[qid] = 0.0;
      continue;
    }
    auto [begin, end] = run.ranking(qid);
    double sum = 0.0;
    long hits = 0;
    long pos = 0;
    for (const RunEntry* e = begin; e != end; ++e) {
      ++pos;
      auto g = judgments.grade(qid, e->docid);
      if (g && grade_value(*g) >= binary_threshold) {
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(pos);
      }
    }
    result.per_query[qid] = sum / static_cast<double>(total_relevant);
  }
  result.mean = detail::mean_of(result.per_query);
  return result;
}

inline EvalResult evaluate(const RunTable& run, const JudgmentSet& judgments,
                           const std::vector<std::string>& qids, const MetricSpec& spec) {
  if (spec.kind == MetricSpec::Kind::Ndcg)
    return ndcg_at_k(run, judgments, qids, spec.k, spec.gain, spec.skip_empty);
  return average_precision(run, judgments, qids, spec.binary_threshold, spec.skip_empty);
}

// Applies the metric to every run; results ordered by run_tag.
inline std::vector<EvalResult> evaluate_all(const std::vector<RunTable>& runs,
                                            const JudgmentSet& judgments,
                                            const std::vector<std::string>& qids,
                                            const MetricSpec& spec) {
  if (qids.empty()) throw DataError("no queries selected");
  std::vector<EvalResult> out;
  out.reserve(runs.size());
  for (const auto& run : runs) out.push_back(evaluate(run, judgments, qids, spec));
  std::stable_sort(out.begin(), out.end(),
                   [](const EvalResult& a, const EvalResult& b) { return a.run_tag < b.run_tag; });
  return out;
}

}  // namespace stc
