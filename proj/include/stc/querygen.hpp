#pragma once

// One generated query per seed passage, the acceptance filter over
// generated queries, and query length statistics per origin group.

#include <climits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stc/common.hpp"
#include "stc/corpus.hpp"
#include "stc/genbackend.hpp"

namespace stc {

enum class RejectReason { Unreasonable, TooFewRelevant, TooManyRelevant, Manual };

inline const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::Unreasonable: return "unreasonable";
    case RejectReason::TooFewRelevant: return "too_few_relevant";
    case RejectReason::TooManyRelevant: return "too_many_relevant";
    case RejectReason::Manual: return "manual";
  }
  return "?";
}

struct GeneratedQuery {
  Query query;  // origin = generator tag, seed_pid set
  std::string generator_tag;
  bool accepted = true;
  std::optional<RejectReason> rejection;
};

struct GenerationOutcome {
  std::vector<GeneratedQuery> queries;
  std::vector<std::pair<std::string, std::string>> failures;  // (pid, error)
};

// Generates one query per passage. The query text is the first line of the
// response, trimmed. A backend failure skips that passage and the run
// continues; failures are returned for logging. qids are derived from the
// seed pid so reruns are stable.
inline GenerationOutcome generate_queries(const std::vector<Passage>& passages,
                                          GenerationBackend& backend,
                                          const GenerationConfig& config,
                                          const std::string& prompt_template,
                                          const std::string& generator_tag,
                                          int max_inflight = 4) {
  if (generator_tag.empty() || generator_tag == "real" || has_whitespace(generator_tag))
    throw ConfigError("bad generator tag \"" + generator_tag + "\"");
  struct Slot {
    std::optional<GeneratedQuery> ok;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(passages.size());
  parallel_for(passages.size(), max_inflight, [&](size_t i) {
    const Passage& p = passages[i];
    try {
      PromptRequest request;
      request.user_text = fill_template(prompt_template, {{"passage", p.text}});
      request.config = config;
      std::string response = backend.generate(request);
      std::string text = trim(response.substr(0, response.find('\n')));
      if (text.empty()) throw BackendError("empty query text in response");
      GeneratedQuery gq;
      gq.generator_tag = generator_tag;
      gq.query.qid = generator_tag + "_" + p.pid;
      gq.query.text = text;
      gq.query.generator = generator_tag;
      gq.query.seed_pid = p.pid;
      slots[i].ok = std::move(gq);
    } catch (const Error& e) {
      slots[i].error = e.what();
    }
  });
  GenerationOutcome out;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].ok)
      out.queries.push_back(std::move(*slots[i].ok));
    else
      out.failures.emplace_back(passages[i].pid, *slots[i].error);
  }
  return out;
}

// Flags queries with too few/too many relevant documents (grade >= 1 in the
// supplied judgments) or listed for manual rejection. Only ever flips
// accepted -> rejected; applying it twice changes nothing. Without judgments
// the relevant-count thresholds are vacuous.
inline std::vector<GeneratedQuery> apply_acceptance(
    std::vector<GeneratedQuery> queries, const std::optional<JudgmentSet>& judgments,
    int min_rel = 1, std::optional<int> max_rel = std::nullopt,
    const std::vector<std::string>& manual_reject = {}) {
  std::set<std::string> known;
  for (const auto& q : queries) known.insert(q.query.qid);
  for (const auto& qid : manual_reject)
    if (!known.count(qid)) throw DataError("manual reject list names unknown qid \"" + qid + "\"");
  std::set<std::string> manual(manual_reject.begin(), manual_reject.end());

  for (auto& q : queries) {
    if (!q.accepted) continue;
    if (manual.count(q.query.qid)) {
      q.accepted = false;
      q.rejection = RejectReason::Manual;
      continue;
    }
    if (!judgments) continue;
    long relevant = 0;
    for (Grade g : judgments->grades_for(q.query.qid))
      if (grade_value(g) >= 1) ++relevant;
    if (relevant < min_rel) {
      q.accepted = false;
      q.rejection = RejectReason::TooFewRelevant;
    } else if (max_rel && relevant > *max_rel) {
      q.accepted = false;
      q.rejection = RejectReason::TooManyRelevant;
    }
  }
  return queries;
}

struct QueryStats {
  int64_t count = 0;
  double mean_length = 0.0;
  int min_length = 0;
  int max_length = 0;
};

// Term counts are whitespace-delimited. Group keys: "all", "real", one per
// generator tag; empty groups are absent.
inline std::map<std::string, QueryStats> query_stats(const std::vector<Query>& queries) {
  std::map<std::string, std::vector<int>> lengths;
  for (const auto& q : queries) {
    int len = static_cast<int>(split_ws(q.text).size());
    lengths["all"].push_back(len);
    lengths[q.is_real() ? "real" : *q.generator].push_back(len);
  }
  std::map<std::string, QueryStats> out;
  for (const auto& [group, ls] : lengths) {
    QueryStats s;
    s.count = static_cast<int64_t>(ls.size());
    long sum = 0;
    s.min_length = INT_MAX;
    s.max_length = 0;
    for (int l : ls) {
      sum += l;
      s.min_length = std::min(s.min_length, l);
      s.max_length = std::max(s.max_length, l);
    }
    s.mean_length = static_cast<double>(sum) / static_cast<double>(ls.size());
    out[group] = s;
  }
  return out;
}

}  // namespace stc
