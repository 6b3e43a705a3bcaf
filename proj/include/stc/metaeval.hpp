#pragma once

// Cross-condition comparison of system orderings: Kendall's tau over mean
// scores, confusion matrices with Cohen's kappa between judgment sets, and
// per-category bias aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stc/common.hpp"
#include "stc/corpus.hpp"
#include "stc/metrics.hpp"

namespace stc {

struct ConditionScores {
  std::string condition_name;
  std::map<std::string, double> scores;  // run_tag -> mean effectiveness

  static ConditionScores from_eval(const std::string& name,
                                   const std::vector<EvalResult>& results) {
    ConditionScores cs;
    cs.condition_name = name;
    for (const auto& r : results) cs.scores[r.run_tag] = r.mean;
    return cs;
  }
};

enum class TauVariant { B, A };

namespace detail {

// Pairs must arrive sorted by (x, y). Counts the discordant pairs as the
// exchanges a merge sort needs to order y ascending (Knight's method).
inline int64_t merge_count_inversions(std::vector<double>& y, std::vector<double>& tmp,
                                      size_t lo, size_t hi) {
  if (hi - lo < 2) return 0;
  size_t mid = lo + (hi - lo) / 2;
  int64_t count = merge_count_inversions(y, tmp, lo, mid) +
                  merge_count_inversions(y, tmp, mid, hi);
  size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (y[j] < y[i]) {
      count += static_cast<int64_t>(mid - i);
      tmp[k++] = y[j++];
    } else {
      tmp[k++] = y[i++];
    }
  }
  while (i < mid) tmp[k++] = y[i++];
  while (j < hi) tmp[k++] = y[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, y.begin() + lo);
  return count;
}

template <typename Less>
inline int64_t tie_pairs(const std::vector<std::pair<double, double>>& v, Less less) {
  int64_t total = 0;
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i + 1;
    while (j < v.size() && !less(v[i], v[j]) && !less(v[j], v[i])) ++j;
    int64_t t = static_cast<int64_t>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

}  // namespace detail

// Kendall rank correlation between two equally indexed score vectors.
// Tau-b corrects the denominator for ties; tau-a divides by all pairs.
// Convention for degenerate input: two fully tied vectors have identical
// (flat) orderings and score 1; one fully tied vector against a
// non-degenerate one yields NaN (tau-b's denominator vanishes).
inline double kendall_tau_scores(const std::vector<double>& xs, const std::vector<double>& ys,
                                 TauVariant variant = TauVariant::B) {
  if (xs.size() != ys.size()) throw DataError("kendall tau: vectors differ in length");
  size_t n = xs.size();
  if (n < 2) throw DataError("kendall tau: need at least two systems");

  std::vector<std::pair<double, double>> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = {xs[i], ys[i]};
  std::sort(v.begin(), v.end());

  int64_t tot = static_cast<int64_t>(n) * (static_cast<int64_t>(n) - 1) / 2;
  int64_t n1 = detail::tie_pairs(v, [](const auto& a, const auto& b) { return a.first < b.first; });
  int64_t n3 = detail::tie_pairs(v, [](const auto& a, const auto& b) { return a < b; });

  std::vector<double> y(n), tmp(n);
  for (size_t i = 0; i < n; ++i) y[i] = v[i].second;
  int64_t discordant = detail::merge_count_inversions(y, tmp, 0, n);

  // y is now sorted ascending; count its tie pairs directly.
  int64_t n2 = 0;
  {
    size_t i = 0;
    while (i < n) {
      size_t j = i + 1;
      while (j < n && y[j] == y[i]) ++j;
      int64_t t = static_cast<int64_t>(j - i);
      n2 += t * (t - 1) / 2;
      i = j;
    }
  }

  int64_t con_minus_dis = tot - n1 - n2 + n3 - 2 * discordant;
  if (variant == TauVariant::A)
    return static_cast<double>(con_minus_dis) / static_cast<double>(tot);

  if (tot == n1 && tot == n2) return 1.0;  // both orderings flat
  if (tot == n1 || tot == n2) return std::numeric_limits<double>::quiet_NaN();
  double denom = std::sqrt(static_cast<double>(tot - n1) * static_cast<double>(tot - n2));
  return static_cast<double>(con_minus_dis) / denom;
}

inline double kendall_tau(const ConditionScores& a, const ConditionScores& b,
                          TauVariant variant = TauVariant::B) {
  std::vector<std::string> only_a, only_b;
  for (const auto& kv : a.scores)
    if (!b.scores.count(kv.first)) only_a.push_back(kv.first);
  for (const auto& kv : b.scores)
    if (!a.scores.count(kv.first)) only_b.push_back(kv.first);
  if (!only_a.empty() || !only_b.empty()) {
    std::string msg = "kendall tau: run sets differ;";
    if (!only_a.empty()) {
      msg += " only in " + a.condition_name + ":";
      for (const auto& t : only_a) msg += " " + t;
    }
    if (!only_b.empty()) {
      msg += " only in " + b.condition_name + ":";
      for (const auto& t : only_b) msg += " " + t;
    }
    throw DataError(msg);
  }
  std::vector<double> xs, ys;
  xs.reserve(a.scores.size());
  ys.reserve(a.scores.size());
  for (const auto& [tag, s] : a.scores) {
    xs.push_back(s);
    ys.push_back(b.scores.at(tag));
  }
  return kendall_tau_scores(xs, ys, variant);
}

// ---------------------------------------------------------------------------
// Agreement

// 4x4 counts, rows = judge A's grade, columns = judge B's grade. Stored by
// grade value; presentation order (rows_desc) descends 3..0 the way the
// agreement tables are usually printed.
struct ConfusionMatrix {
  std::array<std::array<int64_t, 4>, 4> counts{};

  int64_t& at(Grade a, Grade b) { return counts[grade_value(a)][grade_value(b)]; }
  int64_t at(Grade a, Grade b) const { return counts[grade_value(a)][grade_value(b)]; }

  int64_t total() const {
    int64_t t = 0;
    for (const auto& row : counts)
      for (int64_t c : row) t += c;
    return t;
  }

  // Rows and columns ordered grade 3 first, matching the usual table layout.
  static ConfusionMatrix from_rows_desc(const std::array<std::array<int64_t, 4>, 4>& rows) {
    ConfusionMatrix m;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m.counts[3 - i][3 - j] = rows[i][j];
    return m;
  }

  std::array<std::array<int64_t, 4>, 4> rows_desc() const {
    std::array<std::array<int64_t, 4>, 4> rows{};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) rows[i][j] = counts[3 - i][3 - j];
    return rows;
  }

  ConfusionMatrix transposed() const {
    ConfusionMatrix m;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m.counts[j][i] = counts[i][j];
    return m;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

struct AgreementReport {
  ConfusionMatrix matrix;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  double kappa = 0.0;
  bool weighted = false;
};

enum class KappaWeighting { None, Linear };

// Unweighted Cohen's kappa: po = trace/total, pe from the marginals,
// kappa = (po - pe) / (1 - pe). The linear weighting is a sensitivity
// option, off by default.
inline AgreementReport cohen_kappa(const ConfusionMatrix& matrix,
                                   KappaWeighting weighting = KappaWeighting::None) {
  AgreementReport report;
  report.matrix = matrix;
  report.weighted = weighting == KappaWeighting::Linear;
  double total = static_cast<double>(matrix.total());
  if (total <= 0) throw DataError("cohen kappa: empty confusion matrix");

  std::array<double, 4> row_sum{}, col_sum{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      row_sum[i] += static_cast<double>(matrix.counts[i][j]);
      col_sum[j] += static_cast<double>(matrix.counts[i][j]);
    }

  double trace = 0.0;
  for (int i = 0; i < 4; ++i) trace += static_cast<double>(matrix.counts[i][i]);
  report.observed_agreement = trace / total;
  double pe = 0.0;
  for (int g = 0; g < 4; ++g) pe += row_sum[g] * col_sum[g] / (total * total);
  report.expected_agreement = pe;

  if (weighting == KappaWeighting::None) {
    if (pe >= 1.0) throw DataError("cohen kappa: expected agreement is 1; kappa undefined");
    report.kappa = (report.observed_agreement - pe) / (1.0 - pe);
    return report;
  }

  // Linear weights: disagreement weight |i - j| / 3.
  double wo = 0.0, we = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double w = std::abs(i - j) / 3.0;
      wo += w * static_cast<double>(matrix.counts[i][j]) / total;
      we += w * row_sum[i] * col_sum[j] / (total * total);
    }
  if (we <= 0.0) throw DataError("cohen kappa: weighted expected disagreement is 0");
  report.kappa = 1.0 - wo / we;
  return report;
}

struct ConfusionBuild {
  ConfusionMatrix matrix;
  int64_t only_in_a = 0;  // keys present in a single set, excluded from counts
  int64_t only_in_b = 0;
};

// Tally over the intersection of (qid, docid) keys, optionally restricted to
// a qid subset (empty = all qids).
inline ConfusionBuild build_confusion(const JudgmentSet& a, const JudgmentSet& b,
                                      const std::vector<std::string>& qids = {}) {
  std::set<std::string> allow(qids.begin(), qids.end());
  auto allowed = [&](const std::string& qid) { return allow.empty() || allow.count(qid) > 0; };
  ConfusionBuild out;
  for (const auto& [key, ga] : a.entries) {
    if (!allowed(key.first)) continue;
    auto it = b.entries.find(key);
    if (it == b.entries.end()) {
      ++out.only_in_a;
      continue;
    }
    ++out.matrix.at(ga, it->second);
  }
  for (const auto& [key, gb] : b.entries) {
    if (!allowed(key.first)) continue;
    if (!a.entries.count(key)) ++out.only_in_b;
  }
  if (out.matrix.total() == 0)
    throw DataError("confusion matrix: judgment sets share no (qid, docid) pairs");
  return out;
}

// ---------------------------------------------------------------------------
// Condition comparison and bias aggregation

struct ScatterRow {
  std::string run_tag;
  SystemCategory category = SystemCategory::Unknown;
  double score_a = 0.0;
  double score_b = 0.0;
};

struct CategoryBias {
  int64_t count = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double mean_diff = 0.0;  // mean of (score_b - score_a)
};

struct BiasReport {
  std::map<SystemCategory, CategoryBias> per_category;  // the four known categories
  int64_t unknown_runs = 0;
};

struct ComparisonReport {
  double tau = 0.0;
  TauVariant variant = TauVariant::B;
  std::vector<ScatterRow> rows;  // ordered by run_tag
  BiasReport bias;
};

inline ComparisonReport compare_conditions(
    const ConditionScores& a, const ConditionScores& b,
    const std::map<std::string, SystemCategory>& categories,
    TauVariant variant = TauVariant::B) {
  ComparisonReport report;
  report.variant = variant;
  report.tau = kendall_tau(a, b, variant);
  for (const auto& [tag, score_a] : a.scores) {
    ScatterRow row;
    row.run_tag = tag;
    row.score_a = score_a;
    row.score_b = b.scores.at(tag);
    auto it = categories.find(tag);
    row.category = it == categories.end() ? SystemCategory::Unknown : it->second;
    report.rows.push_back(std::move(row));
  }
  std::map<SystemCategory, std::pair<int64_t, std::array<double, 2>>> acc;
  for (const auto& row : report.rows) {
    if (row.category == SystemCategory::Unknown) {
      ++report.bias.unknown_runs;
      continue;
    }
    auto& slot = acc[row.category];
    slot.first += 1;
    slot.second[0] += row.score_a;
    slot.second[1] += row.score_b;
  }
  for (const auto& [cat, slot] : acc) {
    CategoryBias bias;
    bias.count = slot.first;
    bias.mean_a = slot.second[0] / static_cast<double>(slot.first);
    bias.mean_b = slot.second[1] / static_cast<double>(slot.first);
    bias.mean_diff = bias.mean_b - bias.mean_a;
    report.bias.per_category[cat] = bias;
  }
  return report;
}

inline ComparisonReport compare_conditions(
    const std::vector<EvalResult>& eval_a, const std::vector<EvalResult>& eval_b,
    const std::map<std::string, SystemCategory>& categories,
    TauVariant variant = TauVariant::B) {
  return compare_conditions(ConditionScores::from_eval("a", eval_a),
                            ConditionScores::from_eval("b", eval_b), categories, variant);
}

}  // namespace stc
