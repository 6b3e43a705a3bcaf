#pragma once

// Pluggable text generation: a chat-completions HTTP endpoint with bounded
// retries and a persistent response cache, plus a deterministic offline mock
// so the whole pipeline runs without any model behind it.
//
// The cache is an append-only JSONL file keyed by a digest of the request's
// decoding-relevant fields. A warm cache answers without touching the
// network, so reruns are byte-stable and resumable.

#ifdef STC_USE_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "stc/common.hpp"
#include "stc/corpus.hpp"
#include "stc/detail/sha256.hpp"

namespace stc {

struct GenerationConfig {
  std::string model_tag = "gpt-4";
  double temperature = 0.0;
  double top_p = 1.0;
  double frequency_penalty = 0.5;
  double presence_penalty = 0.0;
  int max_output_tokens = 256;
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";

  void validate() const {
    if (temperature < 0) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be positive");
  }
};

struct PromptRequest {
  std::string system_text;
  std::string user_text;
  GenerationConfig config;
};

// Digest over exactly the fields that select a response: prompt texts plus
// decoding parameters. Endpoint and key env are deployment details and do
// not participate.
inline std::string request_digest(const PromptRequest& r) {
  nlohmann::json j;
  j["system_text"] = r.system_text;
  j["user_text"] = r.user_text;
  j["model_tag"] = r.config.model_tag;
  j["temperature"] = r.config.temperature;
  j["top_p"] = r.config.top_p;
  j["frequency_penalty"] = r.config.frequency_penalty;
  j["presence_penalty"] = r.config.presence_penalty;
  j["max_output_tokens"] = r.config.max_output_tokens;
  return detail::sha256_hex(j.dump());
}

struct CachedResponse {
  std::string request_digest;
  std::string response_text;
  std::string created_at;
};

// Append-only JSONL cache, loaded into memory on construction. With an empty
// path the cache lives in memory only. A later entry for the same digest
// wins, so appends can safely repeat.
class ResponseCache {
 public:
  ResponseCache() = default;

  explicit ResponseCache(std::string path) : path_(std::move(path)) {
    if (path_.empty()) return;
    std::ifstream in(path_);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("digest") || !j.contains("response"))
        throw ParseError("cache line " + std::to_string(lineno) + ": malformed entry");
      mem_[j["digest"].get<std::string>()] = j["response"].get<std::string>();
    }
  }

  std::optional<std::string> lookup(const std::string& digest) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = mem_.find(digest);
    if (it == mem_.end()) return std::nullopt;
    return it->second;
  }

  void put(const std::string& digest, const std::string& response) {
    CachedResponse entry{digest, response, now_iso8601()};
    std::lock_guard<std::mutex> lock(mu_);
    mem_[entry.request_digest] = entry.response_text;
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    nlohmann::json j;
    j["digest"] = entry.request_digest;
    j["response"] = entry.response_text;
    j["created_at"] = entry.created_at;
    out << j.dump() << '\n';
    if (!out) throw Error("cache append failure: " + path_);
  }

  size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return mem_.size();
  }

  static std::string now_iso8601() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> mem_;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string generate(const PromptRequest& request) = 0;
};

struct BackendOptions {
  int attempts = 3;
  int backoff_ms = 1000;  // doubles per retry
  int max_inflight = 4;
};

namespace detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint url missing scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.base = url;
    out.path = "/";
  } else {
    out.base = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  return out;
}

inline bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace detail

// Chat-completions style client: messages array in, choices[0].message.content
// out. Bearer token read from the environment variable named by the request
// config. Retries timeouts, 429 and 5xx with exponential backoff.
class HttpBackend : public GenerationBackend {
 public:
  explicit HttpBackend(ResponseCache& cache, BackendOptions options = {})
      : cache_(cache), options_(options) {}

  std::string generate(const PromptRequest& request) override {
    if (trim(request.user_text).empty()) throw DataError("prompt request has empty user text");
    request.config.validate();
    const std::string digest = request_digest(request);
    if (auto hit = cache_.lookup(digest)) return *hit;

    nlohmann::json body;
    body["model"] = request.config.model_tag;
    body["temperature"] = request.config.temperature;
    body["top_p"] = request.config.top_p;
    body["frequency_penalty"] = request.config.frequency_penalty;
    body["presence_penalty"] = request.config.presence_penalty;
    body["max_tokens"] = request.config.max_output_tokens;
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system_text.empty())
      messages.push_back({{"role", "system"}, {"content", request.system_text}});
    messages.push_back({{"role", "user"}, {"content", request.user_text}});
    body["messages"] = messages;
    const std::string payload = body.dump();

    auto url = detail::split_url(request.config.endpoint_url);
    httplib::Headers headers;
    if (!request.config.api_key_env.empty()) {
      const char* key = std::getenv(request.config.api_key_env.c_str());
      if (key != nullptr && *key != '\0')
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
      if (attempt > 1) {
        int delay = options_.backoff_ms << (attempt - 2);
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
      httplib::Client client(url.base);
      client.set_connection_timeout(30);
      client.set_read_timeout(120);
      auto res = client.Post(url.path, headers, payload, "application/json");
      if (!res) {
        last_error = "connection error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
        if (detail::retryable_status(res->status)) continue;
        throw BackendError("endpoint rejected request: " + last_error);
      }
      nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
          !reply["choices"][0].contains("message") ||
          !reply["choices"][0]["message"].contains("content"))
        throw BackendError("malformed response JSON: " + res->body.substr(0, 512));
      std::string text = reply["choices"][0]["message"]["content"].get<std::string>();
      cache_.put(digest, text);
      return text;
    }
    throw BackendError("request failed after " + std::to_string(options_.attempts) +
                       " attempts; last error: " + last_error);
  }

 private:
  ResponseCache& cache_;
  BackendOptions options_;
};

// ---------------------------------------------------------------------------
// Offline mock

// Collection term counts, used by the mock to pick a passage's rarest terms.
struct CollectionStats {
  std::map<std::string, int64_t> term_count;

  static CollectionStats from_passages(const std::vector<Passage>& passages) {
    CollectionStats stats;
    for (const auto& p : passages)
      for (const auto& term : tokenize(p.text)) ++stats.term_count[term];
    return stats;
  }

  int64_t count(const std::string& term) const {
    auto it = term_count.find(term);
    return it == term_count.end() ? 0 : it->second;
  }
};

namespace detail {

// Labeled sections in the toolkit's prompt conventions: a line region
// starting after "Passage:"/"Query:" and ending at the next label, a blank
// line, or the end of the text.
inline std::optional<std::string> find_section(const std::string& text, const char* label) {
  std::string lowered = to_lower(text);
  std::string want = to_lower(std::string(label)) + ":";
  size_t at = lowered.find(want);
  if (at == std::string::npos) return std::nullopt;
  size_t begin = at + want.size();
  size_t end = text.size();
  static const char* labels[] = {"passage:", "query:"};
  for (const char* other : labels) {
    size_t pos = lowered.find(other, begin);
    if (pos != std::string::npos) end = std::min(end, pos);
  }
  size_t blank = text.find("\n\n", begin);
  if (blank != std::string::npos) end = std::min(end, blank);
  std::string content = trim(std::string_view(text).substr(begin, end - begin));
  if (content.empty()) return std::nullopt;
  return content;
}

}  // namespace detail

// Deterministic offline stand-in. Recognizes the default template shapes:
// a "Query:" plus "Passage:" section means a judgment prompt, a "Passage:"
// section with the word "score" means a quality prompt, a bare "Passage:"
// section means query generation. Pure function of (request, seed, stats).
inline std::string mock_generate(const PromptRequest& request, uint64_t seed,
                                 const CollectionStats& stats = {}) {
  const std::string text = request.system_text + "\n" + request.user_text;
  auto passage = detail::find_section(text, "passage");
  auto query = detail::find_section(text, "query");

  if (passage && query) {
    // Judgment: grade from distinct-term overlap between query and passage.
    auto q_terms = tokenize(*query);
    std::set<std::string> q_set(q_terms.begin(), q_terms.end());
    auto p_terms = tokenize(*passage);
    std::set<std::string> p_set(p_terms.begin(), p_terms.end());
    if (q_set.empty()) return "0";
    size_t hit = 0;
    for (const auto& t : q_set)
      if (p_set.count(t)) ++hit;
    double f = static_cast<double>(hit) / static_cast<double>(q_set.size());
    int grade = f == 0.0 ? 0 : f < 0.5 ? 1 : f < 1.0 ? 2 : 3;
    return std::to_string(grade);
  }

  if (passage && contains_ci(text, "score")) {
    // Quality: unique-term ratio with a short-passage penalty.
    auto terms = tokenize(*passage);
    if (terms.empty()) return "0";
    std::set<std::string> uniq(terms.begin(), terms.end());
    double ratio = static_cast<double>(uniq.size()) / static_cast<double>(terms.size());
    double length_factor = std::min(1.0, static_cast<double>(terms.size()) / 20.0);
    long score = std::lround(100.0 * ratio * length_factor);
    score = std::max(0L, std::min(100L, score));
    return std::to_string(score);
  }

  if (passage) {
    // Query generation: the passage's lowest-collection-frequency terms,
    // rarest first; the seed jitters how many terms are taken.
    auto terms = tokenize(*passage);
    std::map<std::string, size_t> first_at;
    for (size_t i = 0; i < terms.size(); ++i)
      if (!first_at.count(terms[i])) first_at[terms[i]] = i;
    std::vector<std::string> distinct;
    for (size_t i = 0; i < terms.size(); ++i)
      if (first_at[terms[i]] == i) distinct.push_back(terms[i]);
    std::stable_sort(distinct.begin(), distinct.end(),
                     [&](const std::string& a, const std::string& b) {
                       int64_t ca = stats.count(a), cb = stats.count(b);
                       if (ca != cb) return ca < cb;
                       return first_at[a] < first_at[b];
                     });
    size_t want = 4 + splitmix64(seed ^ fnv1a(*passage)) % 3;
    if (want > distinct.size()) want = distinct.size();
    std::string out;
    for (size_t i = 0; i < want; ++i) {
      if (i) out += ' ';
      out += distinct[i];
    }
    return out.empty() ? "query" : out;
  }

  return "ok";
}

class MockBackend : public GenerationBackend {
 public:
  explicit MockBackend(uint64_t seed = 0, CollectionStats stats = {})
      : seed_(seed), stats_(std::move(stats)) {}

  std::string generate(const PromptRequest& request) override {
    if (trim(request.user_text).empty()) throw DataError("prompt request has empty user text");
    return mock_generate(request, seed_, stats_);
  }

 private:
  uint64_t seed_;
  CollectionStats stats_;
};

// ---------------------------------------------------------------------------
// Template filling and bounded fan-out

// Replaces every {name} occurrence. Throws when the template lacks a
// required placeholder.
inline std::string fill_template(const std::string& tmpl,
                                 const std::map<std::string, std::string>& values) {
  for (const auto& kv : values) {
    std::string needle = "{" + kv.first + "}";
    if (tmpl.find(needle) == std::string::npos)
      throw ConfigError("prompt template missing required placeholder " + needle);
  }
  std::string out = tmpl;
  for (const auto& [name, value] : values) {
    std::string needle = "{" + name + "}";
    size_t at = 0;
    while ((at = out.find(needle, at)) != std::string::npos) {
      out.replace(at, needle.size(), value);
      at += value.size();
    }
  }
  return out;
}

// Runs fn(i) for i in [0, n) across up to max_inflight threads. Outputs are
// slot-addressed by the callers, so completion order never shows. The first
// exception wins and is rethrown after all workers stop.
template <typename Fn>
inline void parallel_for(size_t n, int max_inflight, Fn&& fn) {
  if (n == 0) return;
  int workers = std::max(1, max_inflight);
  if (workers == 1 || n == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard<std::mutex> lock(err_mu);
        if (first_error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  size_t count = std::min<size_t>(workers, n);
  threads.reserve(count);
  for (size_t t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << content;
  if (!out) throw Error("write failure: " + path);
}

}  // namespace stc
