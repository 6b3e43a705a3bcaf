#pragma once

// Shared fixture plumbing: paths to the bundled data, deterministic random
// builders for property tests, and the generator for the large judged-pool
// fixture whose per-origin grade totals match the published per-query
// means that the stats checks assert.

#include <unistd.h>

#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "stc/common.hpp"
#include "stc/corpus.hpp"
#include "stc/pooling.hpp"

#ifndef STC_FIXTURE_DIR
#define STC_FIXTURE_DIR "fixtures"
#endif
#ifndef STC_PROMPT_DIR
#define STC_PROMPT_DIR "prompts"
#endif

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(STC_FIXTURE_DIR); }
inline fs::path prompt_dir() { return fs::path(STC_PROMPT_DIR); }

inline fs::path fresh_temp_dir(const std::string& label) {
  static std::atomic<int> counter{0};
  fs::path base = fs::temp_directory_path() /
                  ("stc_test_" + label + "_" + std::to_string(::getpid()) + "_" +
                   std::to_string(counter.fetch_add(1)));
  fs::remove_all(base);
  fs::create_directories(base);
  return base;
}

inline std::vector<stc::Query> load_dl23_queries() {
  std::ifstream in(fixture_dir() / "dl23_queries.tsv");
  return stc::parse_queries(in);
}

// Judged-pool fixture: per-origin grade totals spread evenly over the
// fixture's 82 queries. The totals are the per-origin document counts that
// reproduce the published mean-documents-per-grade table.
struct Table2Fixture {
  stc::JudgmentSet judgments;  // source Human
  stc::Pool pool;              // exactly the judged pairs
};

inline Table2Fixture make_table2_fixture(const std::vector<stc::Query>& queries) {
  // grade totals for grades 0,1,2,3 per origin group
  const std::map<std::string, std::array<long, 4>> totals = {
      {"real", {8125, 3272, 1612, 1242}},
      {"t5", {2773, 406, 253, 274}},
      {"llm", {2968, 694, 394, 314}},
  };
  std::map<std::string, std::vector<std::string>> group_qids;
  for (const auto& q : queries)
    group_qids[q.is_real() ? "real" : *q.generator].push_back(q.qid);

  Table2Fixture fx;
  fx.judgments.source = stc::JudgmentSource::Human;
  fx.pool.depth = 10;
  for (const auto& [group, grade_totals] : totals) {
    const auto& qids = group_qids.at(group);
    long n = static_cast<long>(qids.size());
    for (int grade = 0; grade < 4; ++grade) {
      long total = grade_totals[grade];
      long base = total / n;
      long rem = total % n;
      for (long i = 0; i < n; ++i) {
        long count = base + (i < rem ? 1 : 0);
        for (long c = 0; c < count; ++c) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "d%s_g%d_%04ld", qids[i].c_str(), grade, c);
          fx.judgments.entries[{qids[i], buf}] = static_cast<stc::Grade>(grade);
          fx.pool.pairs.insert({qids[i], buf});
        }
      }
    }
  }
  return fx;
}

// Deterministic random builders for property tests.
class TestRng {
 public:
  explicit TestRng(uint64_t seed) : engine_(seed) {}

  long pick(long lo, long hi) {  // inclusive
    return lo + static_cast<long>(engine_() % static_cast<uint64_t>(hi - lo + 1));
  }
  double real01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return real01() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline stc::JudgmentSet random_judgments(TestRng& rng, int n_qids, int docs_per_qid) {
  stc::JudgmentSet set;
  set.source = stc::JudgmentSource::Human;
  for (int q = 0; q < n_qids; ++q) {
    std::string qid = "q" + std::to_string(rng.pick(0, 999)) + "_" + std::to_string(q);
    for (int d = 0; d < docs_per_qid; ++d) {
      std::string docid = "d" + std::to_string(rng.pick(0, 99)) + "_" + std::to_string(d);
      set.entries[{qid, docid}] = static_cast<stc::Grade>(rng.pick(0, 3));
    }
  }
  return set;
}

inline stc::RunTable random_run(TestRng& rng, const std::string& tag, int n_qids,
                                int docs_per_qid) {
  stc::RunTable run;
  run.run_tag = tag;
  for (int q = 0; q < n_qids; ++q) {
    std::string qid = "q" + std::to_string(q);
    for (int d = 0; d < docs_per_qid; ++d) {
      stc::RunEntry e;
      e.qid = qid;
      e.docid = "d" + std::to_string(d);
      e.rank = d + 1;
      // quantized scores so ties happen
      e.score = static_cast<double>(rng.pick(0, 40)) / 8.0;
      run.entries.push_back(e);
    }
  }
  run.canonicalize();
  return run;
}

}  // namespace testsupport
