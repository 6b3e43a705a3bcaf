#pragma once

// Depth-k pooling over canonical run orderings, and per-origin-group grade
// statistics over a judged pool.

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stc/common.hpp"
#include "stc/corpus.hpp"

namespace stc {

struct Pool {
  int depth = 0;
  std::set<std::pair<std::string, std::string>> pairs;  // (qid, docid), ordered
  std::vector<std::string> contributing_runs;
};

// Union of every run's rank-1..depth docids for the listed qids. Pools are
// computed from canonical rank order, not the raw rank column.
inline Pool build_pool(const std::vector<RunTable>& runs,
                       const std::vector<std::string>& qids, int depth) {
  if (runs.empty()) throw DataError("pool: no runs supplied");
  if (depth < 1) throw DataError("pool: depth must be >= 1");
  Pool pool;
  pool.depth = depth;
  std::set<std::string> qid_set(qids.begin(), qids.end());
  for (const auto& run : runs) {
    pool.contributing_runs.push_back(run.run_tag);
    for (const auto& qid : qid_set) {
      auto [begin, end] = run.ranking(qid);
      for (const RunEntry* e = begin; e != end && e->rank <= depth; ++e)
        pool.pairs.insert({qid, e->docid});
    }
  }
  return pool;
}

inline Pool parse_pool(std::istream& in, int depth = 0) {
  Pool pool;
  pool.depth = depth;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split_char(line, '\t');
    if (cols.size() != 2)
      throw detail::line_error("pool", lineno, "expected qid<TAB>docid");
    if (!pool.pairs.insert({trim(cols[0]), trim(cols[1])}).second)
      throw detail::line_error("pool", lineno,
                               "duplicate pair (" + cols[0] + ", " + cols[1] + ")");
  }
  return pool;
}

inline void write_pool(const Pool& pool, std::ostream& out) {
  for (const auto& [qid, docid] : pool.pairs) out << qid << '\t' << docid << '\n';
  if (!out) throw Error("pool write failure");
}

// Mean judged documents per query, split by grade, for one origin group.
// Unjudged pooled pairs land in their own bucket instead of being conflated
// with grade 0.
struct GroupGradeStats {
  int64_t query_count = 0;
  std::array<int64_t, 4> grade_totals{};
  int64_t unjudged_total = 0;

  double mean(Grade g) const {
    if (query_count == 0) return 0.0;
    return static_cast<double>(grade_totals[grade_value(g)]) /
           static_cast<double>(query_count);
  }
  double unjudged_mean() const {
    if (query_count == 0) return 0.0;
    return static_cast<double>(unjudged_total) / static_cast<double>(query_count);
  }
};

struct PoolGradeStats {
  // Group keys: "all", "real", plus one per generator tag. Every query in
  // the supplied list counts toward its group's divisor whether or not it
  // has pooled pairs.
  std::map<std::string, GroupGradeStats> groups;
  int64_t unlisted_pairs = 0;  // pooled pairs whose qid is not in the query list
};

inline PoolGradeStats pool_grade_stats(const Pool& pool, const JudgmentSet& judgments,
                                       const std::vector<Query>& queries) {
  PoolGradeStats stats;
  std::map<std::string, std::string> group_of;  // qid -> group key
  for (const auto& q : queries) {
    std::string group = q.is_real() ? "real" : *q.generator;
    group_of[q.qid] = group;
    ++stats.groups[group].query_count;
    ++stats.groups["all"].query_count;
  }
  for (const auto& [qid, docid] : pool.pairs) {
    auto it = group_of.find(qid);
    if (it == group_of.end()) {
      ++stats.unlisted_pairs;
      continue;
    }
    auto grade = judgments.grade(qid, docid);
    auto bump = [&](GroupGradeStats& g) {
      if (grade)
        ++g.grade_totals[grade_value(*grade)];
      else
        ++g.unjudged_total;
    };
    bump(stats.groups[it->second]);
    bump(stats.groups["all"]);
  }
  return stats;
}

}  // namespace stc
