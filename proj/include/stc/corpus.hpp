#pragma once

// Data model and parsers/serializers for passages, queries, run files and
// judgment files. Parsers reject rather than repair: every invariant
// violation raises ParseError naming the offending line or key.
//
// File formats:
//   corpus  jsonl with "pid"/"text" keys, or 2-column TSV  pid<TAB>text
//   queries TSV  qid<TAB>text<TAB>origin<TAB>seed_pid?   origin "real" or a generator tag
//   run     6 whitespace-separated columns  qid Q0 docid rank score run_tag
//   qrels   4 whitespace-separated columns  qid 0 docid grade

#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stc/common.hpp"

namespace stc {

// ---------------------------------------------------------------------------
// Domain types

struct Passage {
  std::string pid;
  std::string text;

  bool operator==(const Passage&) const = default;
};

// origin: nullopt means a real query; otherwise the generator tag ("t5",
// "llm", ...). Generated queries carry the pid of their seed passage.
struct Query {
  std::string qid;
  std::string text;
  std::optional<std::string> generator;
  std::optional<std::string> seed_pid;

  bool is_real() const { return !generator.has_value(); }
  bool operator==(const Query&) const = default;
};

enum class Grade : int {
  Irrelevant = 0,
  Related = 1,
  HighlyRelevant = 2,
  PerfectlyRelevant = 3,
};

inline std::optional<Grade> try_grade(long v) {
  if (v < 0 || v > 3) return std::nullopt;
  return static_cast<Grade>(v);
}

inline int grade_value(Grade g) { return static_cast<int>(g); }

inline const char* grade_name(Grade g) {
  switch (g) {
    case Grade::Irrelevant: return "irrelevant";
    case Grade::Related: return "related";
    case Grade::HighlyRelevant: return "highly_relevant";
    case Grade::PerfectlyRelevant: return "perfectly_relevant";
  }
  return "?";
}

enum class SystemCategory { GPT, T5, GPTplusT5, Other, Unknown };

inline const char* category_name(SystemCategory c) {
  switch (c) {
    case SystemCategory::GPT: return "gpt";
    case SystemCategory::T5: return "t5";
    case SystemCategory::GPTplusT5: return "gpt+t5";
    case SystemCategory::Other: return "other";
    case SystemCategory::Unknown: return "unknown";
  }
  return "?";
}

inline SystemCategory category_from_string(std::string_view s) {
  std::string t = to_lower(trim(s));
  if (t == "gpt") return SystemCategory::GPT;
  if (t == "t5") return SystemCategory::T5;
  if (t == "gpt+t5" || t == "gptplust5" || t == "gpt_t5") return SystemCategory::GPTplusT5;
  if (t == "other") return SystemCategory::Other;
  if (t == "unknown" || t.empty()) return SystemCategory::Unknown;
  throw ParseError("unknown system category \"" + std::string(s) + "\"");
}

struct RunEntry {
  std::string qid;
  std::string docid;
  int rank = 0;
  double score = 0.0;

  bool operator==(const RunEntry&) const = default;
};

// One system's ranked lists. Entries are kept canonical: grouped by qid
// ascending, within a qid ordered by (score desc, docid asc) with ranks
// rewritten 1..n. Wild run files carry inconsistent rank columns and the
// evaluation depends only on the induced ordering.
struct RunTable {
  std::string run_tag;
  SystemCategory category = SystemCategory::Unknown;
  std::vector<RunEntry> entries;

  void canonicalize() {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry& a, const RunEntry& b) {
                       if (a.qid != b.qid) return a.qid < b.qid;
                       if (a.score != b.score) return a.score > b.score;
                       return a.docid < b.docid;
                     });
    int rank = 0;
    const std::string* cur = nullptr;
    for (auto& e : entries) {
      if (cur == nullptr || e.qid != *cur) {
        cur = &e.qid;
        rank = 0;
      }
      e.rank = ++rank;
    }
  }

  // Canonical ranking for one qid as a contiguous span of entries.
  std::pair<const RunEntry*, const RunEntry*> ranking(const std::string& qid) const {
    auto lo = std::lower_bound(entries.begin(), entries.end(), qid,
                               [](const RunEntry& e, const std::string& q) { return e.qid < q; });
    auto hi = lo;
    while (hi != entries.end() && hi->qid == qid) ++hi;
    return {lo == hi ? nullptr : &*lo, lo == hi ? nullptr : &*lo + (hi - lo)};
  }

  std::set<std::string> qids() const {
    std::set<std::string> out;
    for (const auto& e : entries) out.insert(e.qid);
    return out;
  }

  bool operator==(const RunTable&) const = default;
};

enum class JudgmentSource { Human, Sparse, LlmJudge };

inline const char* source_name(JudgmentSource s) {
  switch (s) {
    case JudgmentSource::Human: return "human";
    case JudgmentSource::Sparse: return "sparse";
    case JudgmentSource::LlmJudge: return "llm-judge";
  }
  return "?";
}

// Graded labels on (qid, docid) pairs. The map keeps entries in
// (qid, docid) lexicographic order, which is also the canonical qrels
// serialization order.
struct JudgmentSet {
  using Key = std::pair<std::string, std::string>;

  JudgmentSource source = JudgmentSource::Human;
  std::string model_tag;  // set for LlmJudge
  std::map<Key, Grade> entries;

  std::optional<Grade> grade(const std::string& qid, const std::string& docid) const {
    auto it = entries.find({qid, docid});
    if (it == entries.end()) return std::nullopt;
    return it->second;
  }

  // All judged grades for one qid, in docid order.
  std::vector<Grade> grades_for(const std::string& qid) const {
    std::vector<Grade> out;
    for (auto it = entries.lower_bound({qid, ""});
         it != entries.end() && it->first.first == qid; ++it)
      out.push_back(it->second);
    return out;
  }

  bool operator==(const JudgmentSet&) const = default;
};

// ---------------------------------------------------------------------------
// Parsers

enum class CorpusFormat { Jsonl, Tsv };

namespace detail {

inline ParseError line_error(const char* what, size_t lineno, const std::string& msg) {
  return ParseError(std::string(what) + " line " + std::to_string(lineno) + ": " + msg);
}

inline void validate_passage(const Passage& p, const char* what, size_t lineno) {
  if (p.pid.empty()) throw line_error(what, lineno, "empty pid");
  if (has_whitespace(p.pid))
    throw line_error(what, lineno, "pid \"" + p.pid + "\" contains whitespace");
  if (trim(p.text).empty())
    throw line_error(what, lineno, "passage \"" + p.pid + "\" has empty text");
}

inline long parse_long(const std::string& tok, const char* what, size_t lineno,
                       const char* field) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw line_error(what, lineno,
                     std::string("non-numeric ") + field + " \"" + tok + "\"");
  return v;
}

inline double parse_double(const std::string& tok, const char* what, size_t lineno,
                           const char* field) {
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw line_error(what, lineno,
                     std::string("non-numeric ") + field + " \"" + tok + "\"");
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace detail

inline std::vector<Passage> parse_corpus(std::istream& in, CorpusFormat format) {
  std::vector<Passage> out;
  std::set<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    Passage p;
    if (format == CorpusFormat::Jsonl) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw detail::line_error("corpus", lineno, "malformed JSON");
      if (!j.is_object() || !j.contains("pid") || !j.contains("text") ||
          !j["pid"].is_string() || !j["text"].is_string())
        throw detail::line_error("corpus", lineno, "record must carry string fields \"pid\" and \"text\"");
      p.pid = j["pid"].get<std::string>();
      p.text = j["text"].get<std::string>();
    } else {
      size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw detail::line_error("corpus", lineno, "expected pid<TAB>text");
      p.pid = line.substr(0, tab);
      p.text = line.substr(tab + 1);
    }
    detail::validate_passage(p, "corpus", lineno);
    if (!seen.insert(p.pid).second)
      throw detail::line_error("corpus", lineno, "duplicate pid \"" + p.pid + "\"");
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_corpus(const std::vector<Passage>& passages, std::ostream& out,
                         CorpusFormat format = CorpusFormat::Jsonl) {
  for (const auto& p : passages) {
    if (format == CorpusFormat::Jsonl) {
      nlohmann::json j;
      j["pid"] = p.pid;
      j["text"] = p.text;
      out << j.dump() << '\n';
    } else {
      if (p.text.find('\n') != std::string::npos || p.text.find('\t') != std::string::npos)
        throw DataError("passage \"" + p.pid + "\" contains TSV separators; use jsonl");
      out << p.pid << '\t' << p.text << '\n';
    }
  }
  if (!out) throw Error("corpus write failure");
}

inline std::vector<Query> parse_queries(std::istream& in) {
  std::vector<Query> out;
  std::set<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split_char(line, '\t');
    if (cols.size() < 3 || cols.size() > 4)
      throw detail::line_error("queries", lineno, "expected qid<TAB>text<TAB>origin[<TAB>seed_pid]");
    Query q;
    q.qid = trim(cols[0]);
    q.text = trim(cols[1]);
    std::string origin = to_lower(trim(cols[2]));
    std::string seed = cols.size() == 4 ? trim(cols[3]) : std::string();
    if (q.qid.empty() || has_whitespace(q.qid))
      throw detail::line_error("queries", lineno, "bad qid \"" + cols[0] + "\"");
    if (q.text.empty()) throw detail::line_error("queries", lineno, "empty query text");
    if (origin.empty()) throw detail::line_error("queries", lineno, "empty origin");
    if (origin == "real") {
      if (!seed.empty())
        throw detail::line_error("queries", lineno,
                                 "real query \"" + q.qid + "\" must not carry a seed_pid");
    } else {
      if (seed.empty())
        throw detail::line_error("queries", lineno,
                                 "generated query \"" + q.qid + "\" requires a seed_pid");
      q.generator = origin;
      q.seed_pid = seed;
    }
    if (!seen.insert(q.qid).second)
      throw detail::line_error("queries", lineno, "duplicate qid \"" + q.qid + "\"");
    out.push_back(std::move(q));
  }
  return out;
}

inline void write_queries(const std::vector<Query>& queries, std::ostream& out) {
  for (const auto& q : queries) {
    out << q.qid << '\t' << q.text << '\t' << (q.is_real() ? "real" : *q.generator) << '\t'
        << (q.seed_pid ? *q.seed_pid : "") << '\n';
  }
  if (!out) throw Error("queries write failure");
}

inline RunTable parse_run(std::istream& in) {
  RunTable table;
  std::set<std::pair<std::string, std::string>> seen_docs;
  std::set<std::pair<std::string, long>> seen_ranks;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split_ws(line);
    if (cols.size() != 6)
      throw detail::line_error("run", lineno,
                               "expected 6 columns, got " + std::to_string(cols.size()));
    RunEntry e;
    e.qid = cols[0];
    e.docid = cols[2];
    long rank = detail::parse_long(cols[3], "run", lineno, "rank");
    if (rank < 1) throw detail::line_error("run", lineno, "rank must be positive");
    e.rank = static_cast<int>(rank);
    e.score = detail::parse_double(cols[4], "run", lineno, "score");
    if (table.run_tag.empty()) {
      table.run_tag = cols[5];
    } else if (table.run_tag != cols[5]) {
      throw detail::line_error("run", lineno,
                               "inconsistent run tag \"" + cols[5] + "\" (expected \"" +
                                   table.run_tag + "\")");
    }
    if (!seen_docs.insert({e.qid, e.docid}).second)
      throw detail::line_error("run", lineno,
                               "duplicate (qid, docid) = (" + e.qid + ", " + e.docid + ")");
    if (!seen_ranks.insert({e.qid, rank}).second)
      throw detail::line_error("run", lineno,
                               "duplicate rank " + cols[3] + " for qid " + e.qid);
    table.entries.push_back(std::move(e));
  }
  if (table.entries.empty()) throw ParseError("run: empty run file");
  table.canonicalize();
  return table;
}

inline void write_run(const RunTable& table, std::ostream& out) {
  for (const auto& e : table.entries) {
    out << e.qid << " Q0 " << e.docid << ' ' << e.rank << ' '
        << detail::format_double(e.score) << ' ' << table.run_tag << '\n';
  }
  if (!out) throw Error("run write failure");
}

inline JudgmentSet parse_qrels(std::istream& in, JudgmentSource source,
                               std::string model_tag = {}) {
  JudgmentSet set;
  set.source = source;
  set.model_tag = std::move(model_tag);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split_ws(line);
    if (cols.size() != 4)
      throw detail::line_error("qrels", lineno,
                               "expected 4 columns, got " + std::to_string(cols.size()));
    long g = detail::parse_long(cols[3], "qrels", lineno, "grade");
    auto grade = try_grade(g);
    if (!grade)
      throw detail::line_error("qrels", lineno,
                               "grade " + cols[3] + " outside {0,1,2,3}");
    auto key = std::make_pair(cols[0], cols[2]);
    if (!set.entries.emplace(key, *grade).second)
      throw detail::line_error("qrels", lineno,
                               "duplicate (qid, docid) = (" + cols[0] + ", " + cols[2] + ")");
  }
  return set;
}

// Canonical 4-column output sorted by (qid, docid); parse_qrels(write_qrels(J))
// reproduces J exactly.
inline void write_qrels(const JudgmentSet& judgments, std::ostream& out) {
  for (const auto& [key, grade] : judgments.entries)
    out << key.first << " 0 " << key.second << ' ' << grade_value(grade) << '\n';
  if (!out) throw Error("qrels write failure");
}

}  // namespace stc
