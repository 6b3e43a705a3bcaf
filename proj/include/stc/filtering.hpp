#pragma once

// Seed-passage selection: seeded random sampling, query-independent quality
// scoring through a generation backend, and threshold filtering.

#include <numeric>
#include <string>
#include <vector>

#include "stc/common.hpp"
#include "stc/corpus.hpp"
#include "stc/genbackend.hpp"

namespace stc {

struct QualityScore {
  std::string pid;
  int score = 0;
  bool malformed = false;   // no usable integer in the response
  std::string raw_response;
};

// Uniform draw of n distinct passages; output order is the draw order and a
// fixed seed reproduces the sample exactly.
inline std::vector<Passage> sample_passages(const std::vector<Passage>& corpus, size_t n,
                                            uint64_t seed) {
  if (n > corpus.size())
    throw DataError("sample: n = " + std::to_string(n) + " exceeds corpus size " +
                    std::to_string(corpus.size()));
  std::vector<size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::vector<Passage> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    size_t j = i + static_cast<size_t>(rng.bounded(idx.size() - i));
    std::swap(idx[i], idx[j]);
    out.push_back(corpus[idx[i]]);
  }
  return out;
}

// Scores one passage. The first integer in the response is the score; a
// response with no integer, or one outside 0..100, marks the result
// malformed instead of retrying — this is a one-off filter by design, and
// the raw response is kept for audit.
inline QualityScore score_passage(const Passage& passage, GenerationBackend& backend,
                                  const GenerationConfig& config,
                                  const std::string& prompt_template) {
  PromptRequest request;
  request.user_text = fill_template(prompt_template, {{"passage", passage.text}});
  request.config = config;
  QualityScore result;
  result.pid = passage.pid;
  result.raw_response = backend.generate(request);
  auto value = first_integer(result.raw_response);
  if (!value || *value < 0 || *value > 100) {
    result.malformed = true;
  } else {
    result.score = static_cast<int>(*value);
  }
  return result;
}

// Fan-out wrapper; results land in input order regardless of scheduling.
// Backend errors propagate.
inline std::vector<QualityScore> score_passages(const std::vector<Passage>& passages,
                                                GenerationBackend& backend,
                                                const GenerationConfig& config,
                                                const std::string& prompt_template,
                                                int max_inflight = 4) {
  std::vector<QualityScore> out(passages.size());
  parallel_for(passages.size(), max_inflight, [&](size_t i) {
    out[i] = score_passage(passages[i], backend, config, prompt_template);
  });
  return out;
}

struct FilterOutcome {
  std::vector<std::string> kept;
  std::vector<std::string> dropped_malformed;
  std::vector<std::string> dropped_lowscore;
};

// kept = score >= threshold and not malformed. The three lists partition the
// input in input order. "Less than threshold" is dropped, so a score equal
// to the threshold stays.
inline FilterOutcome filter_passages(const std::vector<QualityScore>& scores, int threshold) {
  FilterOutcome out;
  for (const auto& s : scores) {
    if (s.malformed)
      out.dropped_malformed.push_back(s.pid);
    else if (s.score >= threshold)
      out.kept.push_back(s.pid);
    else
      out.dropped_lowscore.push_back(s.pid);
  }
  return out;
}

}  // namespace stc
