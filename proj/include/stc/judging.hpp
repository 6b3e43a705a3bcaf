#pragma once

// Judgment production: import of human qrels, seed-passage sparse judgments,
// and model-graded judgments over pooled pairs on the 0..3 scale.

#include <optional>
#include <string>
#include <vector>

#include "stc/common.hpp"
#include "stc/corpus.hpp"
#include "stc/genbackend.hpp"
#include "stc/pooling.hpp"

namespace stc {

// The seed passage that spawned a generated query is its only relevant
// document (grade 3); every other pooled pair for that qid is grade 0.
// Real queries contribute nothing here.
inline JudgmentSet sparse_judgments(const std::vector<Query>& queries, const Pool& pool) {
  JudgmentSet set;
  set.source = JudgmentSource::Sparse;
  std::set<std::string> generated_qids;
  for (const auto& q : queries) {
    if (q.is_real()) continue;
    if (!q.seed_pid || q.seed_pid->empty())
      throw DataError("generated query \"" + q.qid + "\" lacks a seed_pid");
    set.entries[{q.qid, *q.seed_pid}] = Grade::PerfectlyRelevant;
    generated_qids.insert(q.qid);
  }
  for (const auto& [qid, docid] : pool.pairs) {
    if (!generated_qids.count(qid)) continue;
    set.entries.emplace(std::make_pair(qid, docid), Grade::Irrelevant);
  }
  return set;
}

struct LlmJudgeOutcome {
  JudgmentSet judgments;
  // Pairs whose response never parsed; they are graded Irrelevant in the set.
  std::vector<JudgmentSet::Key> flagged;
  // Pairs that failed hard (backend error after retries); absent from the set.
  std::vector<std::pair<JudgmentSet::Key, std::string>> failures;
};

namespace detail {

// First maximal digit run whose value lies in 0..3.
inline std::optional<int> parse_grade_response(const std::string& response) {
  size_t i = 0;
  while (i < response.size()) {
    if (std::isdigit(static_cast<unsigned char>(response[i]))) {
      size_t j = i;
      while (j < response.size() && std::isdigit(static_cast<unsigned char>(response[j]))) ++j;
      if (j - i <= 9) {
        long v = std::stol(response.substr(i, j - i));
        if (v >= 0 && v <= 3) return static_cast<int>(v);
      }
      i = j;
    } else {
      ++i;
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Grades each (query, passage) pair through the backend. An unparsable
// response is re-asked once with an explicit answer-format nudge (a changed
// prompt, so the cache cannot replay the bad answer); if it still does not
// parse the pair is graded Irrelevant and flagged. Hard backend failures are
// collected per pair without aborting the batch.
inline LlmJudgeOutcome llm_judge(const std::vector<std::pair<Query, Passage>>& pairs,
                                 GenerationBackend& backend, const GenerationConfig& config,
                                 const std::string& prompt_template, int max_inflight = 4) {
  struct Slot {
    std::optional<Grade> grade;
    bool flagged = false;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(pairs.size());
  parallel_for(pairs.size(), max_inflight, [&](size_t i) {
    const auto& [query, passage] = pairs[i];
    try {
      PromptRequest request;
      request.user_text = fill_template(
          prompt_template, {{"query", query.text}, {"passage", passage.text}});
      request.config = config;
      auto grade = detail::parse_grade_response(backend.generate(request));
      if (!grade) {
        PromptRequest retry = request;
        retry.user_text += "\n\nAnswer with a single integer between 0 and 3.";
        grade = detail::parse_grade_response(backend.generate(retry));
        if (!grade) {
          slots[i].flagged = true;
          grade = 0;
        }
      }
      slots[i].grade = static_cast<Grade>(*grade);
    } catch (const Error& e) {
      slots[i].error = e.what();
    }
  });

  LlmJudgeOutcome out;
  out.judgments.source = JudgmentSource::LlmJudge;
  out.judgments.model_tag = config.model_tag;
  for (size_t i = 0; i < pairs.size(); ++i) {
    JudgmentSet::Key key{pairs[i].first.qid, pairs[i].second.pid};
    if (slots[i].error) {
      out.failures.emplace_back(key, *slots[i].error);
      continue;
    }
    if (!out.judgments.entries.emplace(key, *slots[i].grade).second)
      throw DataError("llm judge: duplicate pair (" + key.first + ", " + key.second + ")");
    if (slots[i].flagged) out.flagged.push_back(key);
  }
  return out;
}

inline JudgmentSet import_human(std::istream& in) {
  return parse_qrels(in, JudgmentSource::Human);
}

}  // namespace stc
