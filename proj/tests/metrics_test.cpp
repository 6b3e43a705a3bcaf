#include "stc/metrics.hpp"

#include <sstream>

#include <doctest.h>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace stc;

namespace {

// Run over one qid with the given docids in rank order.
RunTable make_run(const std::string& qid, const std::vector<std::string>& docids) {
  RunTable run;
  run.run_tag = "sys";
  int rank = 0;
  double score = static_cast<double>(docids.size());
  for (const auto& d : docids) {
    run.entries.push_back({qid, d, ++rank, score});
    score -= 1.0;
  }
  run.canonicalize();
  return run;
}

JudgmentSet make_qrels(const std::string& qid,
                       const std::vector<std::pair<std::string, int>>& grades) {
  JudgmentSet set;
  for (const auto& [docid, g] : grades) set.entries[{qid, docid}] = *try_grade(g);
  return set;
}

}  // namespace

TEST_CASE("ndcg of an ideal ranking is exactly 1") {
  auto run = make_run("q1", {"d1", "d2", "d3"});
  auto qrels = make_qrels("q1", {{"d1", 3}, {"d2", 2}, {"d3", 1}});
  auto result = ndcg_at_k(run, qrels, {"q1"}, 3);
  CHECK(result.per_query.at("q1") == 1.0);
  CHECK(result.mean == 1.0);
}

TEST_CASE("ndcg hand example: grades [0,3] at k=2") {
  // DCG = 7/log2(3), IDCG = 7, NDCG = 1/log2(3)
  auto run = make_run("q1", {"dx", "dy"});
  auto qrels = make_qrels("q1", {{"dy", 3}});
  auto result = ndcg_at_k(run, qrels, {"q1"}, 2);
  CHECK(result.per_query.at("q1") == doctest::Approx(0.6309297535714575).epsilon(1e-12));
  CHECK(result.per_query.at("q1") ==
        doctest::Approx(oracle::ndcg({0, 3}, {3}, 2)).epsilon(1e-14));
}

TEST_CASE("ndcg degenerate query scores zero and counts in the mean") {
  auto run = make_run("q1", {"d1"});
  auto qrels = make_qrels("q1", {{"d1", 0}, {"d2", 0}});
  auto result = ndcg_at_k(run, qrels, {"q1"}, 10);
  CHECK(result.per_query.at("q1") == 0.0);

  auto skipped = ndcg_at_k(run, qrels, {"q1"}, 10, GainKind::Exponential, true);
  CHECK(skipped.per_query.empty());
  CHECK(skipped.mean == 0.0);

  CHECK_THROWS_AS(ndcg_at_k(run, qrels, {"q1"}, 0), DataError);
}

TEST_CASE("ndcg ignores order changes among unjudged tail documents") {
  auto qrels = make_qrels("q1", {{"d1", 3}, {"d2", 2}});
  auto a = ndcg_at_k(make_run("q1", {"d1", "d2", "u1", "u2", "u3"}), qrels, {"q1"}, 2);
  auto b = ndcg_at_k(make_run("q1", {"d1", "d2", "u3", "u1", "u2"}), qrels, {"q1"}, 2);
  CHECK(a.per_query.at("q1") == b.per_query.at("q1"));
}

TEST_CASE("linear gain differs from exponential") {
  auto run = make_run("q1", {"da", "db"});
  auto qrels = make_qrels("q1", {{"db", 3}, {"da", 1}});
  auto exp_r = ndcg_at_k(run, qrels, {"q1"}, 2, GainKind::Exponential);
  auto lin_r = ndcg_at_k(run, qrels, {"q1"}, 2, GainKind::Linear);
  CHECK(exp_r.per_query.at("q1") ==
        doctest::Approx(oracle::ndcg({1, 3}, {3, 1}, 2, true)).epsilon(1e-14));
  CHECK(lin_r.per_query.at("q1") ==
        doctest::Approx(oracle::ndcg({1, 3}, {3, 1}, 2, false)).epsilon(1e-14));
  CHECK(exp_r.per_query.at("q1") != lin_r.per_query.at("q1"));
}

TEST_CASE("average precision hand examples") {
  {
    auto run = make_run("q1", {"d1", "d2"});
    auto qrels = make_qrels("q1", {{"d1", 3}});
    CHECK(average_precision(run, qrels, {"q1"}).per_query.at("q1") == 1.0);
  }
  {
    // relevant at ranks 1 and 3, R = 2 -> (1 + 2/3)/2
    auto run = make_run("q1", {"d1", "dx", "d2"});
    auto qrels = make_qrels("q1", {{"d1", 2}, {"d2", 3}});
    CHECK(average_precision(run, qrels, {"q1"}).per_query.at("q1") ==
          doctest::Approx(0.833333333333333).epsilon(1e-12));
  }
  {
    auto run = make_run("q1", {"d1"});
    auto qrels = make_qrels("q1", {{"d1", 1}});  // below default threshold 2
    CHECK(average_precision(run, qrels, {"q1"}).per_query.at("q1") == 0.0);
  }
  {
    // unretrieved relevant documents still count in R
    auto run = make_run("q1", {"d1"});
    auto qrels = make_qrels("q1", {{"d1", 3}, {"dmissing", 3}});
    CHECK(average_precision(run, qrels, {"q1"}).per_query.at("q1") == 0.5);
  }
  CHECK_THROWS_AS(average_precision(make_run("q1", {"d1"}), JudgmentSet{}, {"q1"}, 0), DataError);
}

TEST_CASE("metrics match the brute-force oracle on random instances") {
  testsupport::TestRng rng(42);
  for (int iter = 0; iter < 60; ++iter) {
    int n_docs = static_cast<int>(rng.pick(1, 8));
    std::vector<std::string> docids;
    std::vector<std::pair<std::string, int>> judged;
    std::vector<int> ranked_grades;
    std::map<std::string, int> grade_of;
    for (int d = 0; d < n_docs; ++d) {
      std::string id = "d" + std::to_string(d);
      docids.push_back(id);
      int g = static_cast<int>(rng.pick(0, 3));
      // some docs stay unjudged
      if (rng.chance(0.8)) {
        judged.emplace_back(id, g);
        grade_of[id] = g;
      }
    }
    // a judged but unretrieved doc
    if (rng.chance(0.5)) judged.emplace_back("dhidden", static_cast<int>(rng.pick(0, 3)));
    auto run = make_run("q1", docids);
    auto qrels = make_qrels("q1", judged);
    int k = static_cast<int>(rng.pick(1, 10));

    for (const auto& id : docids)
      ranked_grades.push_back(grade_of.count(id) ? grade_of[id] : 0);
    std::vector<int> judged_grades;
    for (const auto& [id, g] : judged) judged_grades.push_back(g);

    auto got = ndcg_at_k(run, qrels, {"q1"}, k);
    CHECK(got.per_query.at("q1") ==
          doctest::Approx(oracle::ndcg(ranked_grades, judged_grades, k)).epsilon(1e-12));

    int threshold = static_cast<int>(rng.pick(1, 3));
    std::vector<bool> ranked_rel;
    for (int g : ranked_grades) ranked_rel.push_back(g >= threshold);
    long total_rel = 0;
    for (int g : judged_grades)
      if (g >= threshold) ++total_rel;
    auto ap = average_precision(run, qrels, {"q1"}, threshold);
    CHECK(ap.per_query.at("q1") ==
          doctest::Approx(oracle::average_precision(ranked_rel, total_rel)).epsilon(1e-12));
  }
}

TEST_CASE("evaluate_all is pure and validates input") {
  auto run = make_run("q1", {"d1", "d2"});
  auto qrels = make_qrels("q1", {{"d1", 3}});
  MetricSpec spec = MetricSpec::parse("ndcg@10");
  auto results = evaluate_all({run, run}, qrels, {"q1"}, spec);
  REQUIRE(results.size() == 2);
  CHECK(results[0].mean == results[1].mean);
  CHECK(results[0].per_query == results[1].per_query);

  CHECK_THROWS_WITH_AS(evaluate_all({run}, qrels, {}, spec), doctest::Contains("no queries"),
                       DataError);
}

TEST_CASE("metric means do not depend on qid order") {
  auto run = make_run("q1", {"d1"});
  RunTable run2 = run;
  run2.entries.push_back({"q2", "d9", 1, 1.0});
  run2.canonicalize();
  JudgmentSet qrels;
  qrels.entries[{"q1", "d1"}] = Grade::PerfectlyRelevant;
  qrels.entries[{"q2", "d8"}] = Grade::HighlyRelevant;
  auto a = ndcg_at_k(run2, qrels, {"q1", "q2"}, 5);
  auto b = ndcg_at_k(run2, qrels, {"q2", "q1"}, 5);
  CHECK(a.mean == b.mean);
}

TEST_CASE("a full complement of runs yields means inside [0,1]") {
  testsupport::TestRng rng(31);
  std::vector<RunTable> runs;
  for (int r = 0; r < 31; ++r)
    runs.push_back(testsupport::random_run(rng, "sys" + std::to_string(r), 4, 10));
  JudgmentSet qrels;
  for (int q = 0; q < 4; ++q)
    for (int d = 0; d < 10; ++d)
      qrels.entries[{"q" + std::to_string(q), "d" + std::to_string(d)}] =
          static_cast<Grade>(rng.pick(0, 3));
  auto results = evaluate_all(runs, qrels, {"q0", "q1", "q2", "q3"}, MetricSpec::parse("ndcg@10"));
  REQUIRE(results.size() == 31);
  for (const auto& r : results) {
    CHECK(r.mean >= 0.0);
    CHECK(r.mean <= 1.0);
    for (const auto& [qid, v] : r.per_query) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  // deterministic ordering by run tag
  for (size_t i = 1; i < results.size(); ++i) CHECK(results[i - 1].run_tag < results[i].run_tag);
}

TEST_CASE("metric spec parsing") {
  CHECK(MetricSpec::parse("ndcg@10").k == 10);
  CHECK(MetricSpec::parse("ndcg@100").k == 100);
  CHECK(MetricSpec::parse("ap").kind == MetricSpec::Kind::AveragePrecision);
  CHECK(MetricSpec::parse("NDCG@5").label() == "ndcg@5");
  CHECK_THROWS_AS(MetricSpec::parse("rbp"), ConfigError);
  CHECK_THROWS_AS(MetricSpec::parse("ndcg@0"), ConfigError);
  CHECK_THROWS_AS(MetricSpec::parse("ndcg@x"), ConfigError);
}
