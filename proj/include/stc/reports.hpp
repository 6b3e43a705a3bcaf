#pragma once

// CSV and JSON artifact formats shared by the CLI and the pipeline:
// eval score tables, scatter rows, bias and agreement reports, and the
// text tables printed by the stats subcommand.

#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stc/common.hpp"
#include "stc/corpus.hpp"
#include "stc/metaeval.hpp"
#include "stc/metrics.hpp"
#include "stc/pooling.hpp"
#include "stc/querygen.hpp"

namespace stc {

namespace detail {

inline std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string fixed2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Eval CSV: run_tag,qid,score with one ALL row per run.

inline void write_eval_csv(const std::vector<EvalResult>& results, std::ostream& out) {
  out << "run_tag,qid,score\n";
  for (const auto& r : results) {
    for (const auto& [qid, score] : r.per_query)
      out << r.run_tag << ',' << qid << ',' << detail::fixed6(score) << '\n';
    out << r.run_tag << ",ALL," << detail::fixed6(r.mean) << '\n';
  }
  if (!out) throw Error("eval csv write failure");
}

// Mean (ALL) scores per run from an eval CSV.
inline std::map<std::string, double> read_eval_means(std::istream& in) {
  std::map<std::string, double> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || (lineno == 1 && t.rfind("run_tag,", 0) == 0)) continue;
    auto cols = split_char(t, ',');
    if (cols.size() != 3)
      throw detail::line_error("eval csv", lineno, "expected run_tag,qid,score");
    if (cols[1] != "ALL") continue;
    if (out.count(cols[0]))
      throw detail::line_error("eval csv", lineno, "duplicate ALL row for run \"" + cols[0] + "\"");
    out[cols[0]] = detail::parse_double(cols[2], "eval csv", lineno, "score");
  }
  if (out.empty()) throw ParseError("eval csv: no ALL rows found");
  return out;
}

// --------------------------------------------------------------------------
// Categories sidecar CSV: run_tag,category

inline std::map<std::string, SystemCategory> parse_categories_csv(std::istream& in) {
  std::map<std::string, SystemCategory> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || (lineno == 1 && to_lower(t).rfind("run_tag,", 0) == 0)) continue;
    auto cols = split_char(t, ',');
    if (cols.size() != 2)
      throw detail::line_error("categories csv", lineno, "expected run_tag,category");
    std::string tag = trim(cols[0]);
    if (out.count(tag))
      throw detail::line_error("categories csv", lineno, "duplicate run_tag \"" + tag + "\"");
    try {
      out[tag] = category_from_string(cols[1]);
    } catch (const ParseError& e) {
      throw detail::line_error("categories csv", lineno, e.what());
    }
  }
  return out;
}

inline void write_categories_csv(const std::map<std::string, SystemCategory>& categories,
                                 std::ostream& out) {
  out << "run_tag,category\n";
  for (const auto& [tag, cat] : categories) out << tag << ',' << category_name(cat) << '\n';
  if (!out) throw Error("categories csv write failure");
}

// --------------------------------------------------------------------------
// Comparison artifacts

inline void write_scatter_csv(const ComparisonReport& report, std::ostream& out) {
  out << "run_tag,category,score_a,score_b\n";
  for (const auto& row : report.rows)
    out << row.run_tag << ',' << category_name(row.category) << ','
        << detail::fixed6(row.score_a) << ',' << detail::fixed6(row.score_b) << '\n';
  if (!out) throw Error("scatter csv write failure");
}

inline nlohmann::json bias_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["tau"] = report.tau;
  j["tau_variant"] = report.variant == TauVariant::B ? "tau_b" : "tau_a";
  j["runs"] = report.rows.size();
  j["unknown_category_runs"] = report.bias.unknown_runs;
  nlohmann::json cats;
  for (const auto& [cat, bias] : report.bias.per_category) {
    nlohmann::json c;
    c["count"] = bias.count;
    c["mean_a"] = bias.mean_a;
    c["mean_b"] = bias.mean_b;
    c["mean_diff"] = bias.mean_diff;
    cats[category_name(cat)] = c;
  }
  j["categories"] = cats;
  return j;
}

// --------------------------------------------------------------------------
// Agreement artifacts

inline nlohmann::json agreement_json(const AgreementReport& report, int64_t only_in_a = 0,
                                     int64_t only_in_b = 0) {
  nlohmann::json j;
  j["labels"] = {"perfectly_relevant", "highly_relevant", "related", "irrelevant"};
  auto rows = report.matrix.rows_desc();
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& row : rows) matrix.push_back(row);
  j["matrix"] = matrix;
  j["total"] = report.matrix.total();
  j["observed_agreement"] = report.observed_agreement;
  j["expected_agreement"] = report.expected_agreement;
  j["kappa"] = report.kappa;
  j["weighted"] = report.weighted;
  j["only_in_a"] = only_in_a;
  j["only_in_b"] = only_in_b;
  return j;
}

// 4x4 matrix as a JSON array of rows in grade-descending order, optionally
// wrapped in an object under "matrix".
inline ConfusionMatrix parse_matrix_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("matrix: malformed JSON");
  if (j.is_object() && j.contains("matrix")) j = j["matrix"];
  if (!j.is_array() || j.size() != 4) throw ParseError("matrix: expected 4 rows");
  std::array<std::array<int64_t, 4>, 4> rows{};
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_array() || j[i].size() != 4)
      throw ParseError("matrix: row " + std::to_string(i) + " must have 4 entries");
    for (int k = 0; k < 4; ++k) {
      if (!j[i][k].is_number_integer() || j[i][k].get<int64_t>() < 0)
        throw ParseError("matrix: counts must be non-negative integers");
      rows[i][k] = j[i][k].get<int64_t>();
    }
  }
  return ConfusionMatrix::from_rows_desc(rows);
}

// --------------------------------------------------------------------------
// Query and pool grade statistics

namespace detail {

inline std::vector<std::string> group_order(const std::vector<std::string>& keys) {
  std::vector<std::string> order;
  for (const char* fixed : {"all", "real"})
    for (const auto& k : keys)
      if (k == fixed) order.push_back(k);
  for (const auto& k : keys)
    if (k != "all" && k != "real") order.push_back(k);
  return order;
}

}  // namespace detail

inline nlohmann::json query_stats_json(const std::map<std::string, QueryStats>& stats) {
  nlohmann::json j;
  for (const auto& [group, s] : stats) {
    nlohmann::json g;
    g["count"] = s.count;
    g["mean_length"] = s.mean_length;
    g["min_length"] = s.min_length;
    g["max_length"] = s.max_length;
    j[group] = g;
  }
  return j;
}

inline void print_query_stats(const std::map<std::string, QueryStats>& stats,
                              std::ostream& out) {
  std::vector<std::string> keys;
  for (const auto& kv : stats) keys.push_back(kv.first);
  auto order = detail::group_order(keys);
  out << std::left << std::setw(18) << "";
  for (const auto& g : order) out << std::setw(12) << g;
  out << '\n';
  out << std::setw(18) << "queries";
  for (const auto& g : order) out << std::setw(12) << stats.at(g).count;
  out << '\n';
  out << std::setw(18) << "avg_length";
  for (const auto& g : order) out << std::setw(12) << detail::fixed2(stats.at(g).mean_length);
  out << '\n';
  out << std::setw(18) << "min_length";
  for (const auto& g : order) out << std::setw(12) << stats.at(g).min_length;
  out << '\n';
  out << std::setw(18) << "max_length";
  for (const auto& g : order) out << std::setw(12) << stats.at(g).max_length;
  out << '\n';
}

inline nlohmann::json grade_stats_json(const PoolGradeStats& stats) {
  nlohmann::json j;
  nlohmann::json groups;
  for (const auto& [group, s] : stats.groups) {
    nlohmann::json g;
    g["queries"] = s.query_count;
    nlohmann::json means, totals;
    for (int grade = 0; grade < 4; ++grade) {
      std::string key = "grade_" + std::to_string(grade);
      totals[key] = s.grade_totals[grade];
      means[key] = s.mean(static_cast<Grade>(grade));
    }
    totals["unjudged"] = s.unjudged_total;
    means["unjudged"] = s.unjudged_mean();
    g["totals"] = totals;
    g["mean_per_query"] = means;
    groups[group] = g;
  }
  j["groups"] = groups;
  j["unlisted_pairs"] = stats.unlisted_pairs;
  return j;
}

inline void print_grade_stats(const PoolGradeStats& stats, std::ostream& out) {
  std::vector<std::string> keys;
  for (const auto& kv : stats.groups) keys.push_back(kv.first);
  auto order = detail::group_order(keys);
  out << std::left << std::setw(18) << "mean docs/query";
  for (const auto& g : order) out << std::setw(12) << g;
  out << '\n';
  for (int grade = 3; grade >= 0; --grade) {
    out << std::setw(18) << grade_name(static_cast<Grade>(grade));
    for (const auto& g : order)
      out << std::setw(12) << detail::fixed2(stats.groups.at(g).mean(static_cast<Grade>(grade)));
    out << '\n';
  }
  out << std::setw(18) << "unjudged";
  for (const auto& g : order)
    out << std::setw(12) << detail::fixed2(stats.groups.at(g).unjudged_mean());
  out << '\n';
}

}  // namespace stc
