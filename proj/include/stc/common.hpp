#pragma once

// Shared error types, string helpers and the deterministic RNG used
// throughout the toolkit. Everything that influences an artifact must be
// reproducible from a seed, so no code path may draw from std::random_device
// or from distributions with implementation-defined output.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stc {

// Base class for everything this library throws. Subclasses map onto the
// CLI exit codes: ConfigError -> 1, ParseError/DataError -> 2,
// BackendError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data: bad lines, duplicate keys, out-of-range grades.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Contract violations on otherwise well-formed data (mismatched run sets,
// unknown qids, empty intersections).
class DataError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_char(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                        [](char a, char b) {
                          return std::tolower(static_cast<unsigned char>(a)) ==
                                 std::tolower(static_cast<unsigned char>(b));
                        });
  return it != haystack.end();
}

inline bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

// Lowercased alphanumeric tokens; everything else is a separator. This is
// the tokenization used by the mock backend heuristics, not by the query
// length statistics (those are plain whitespace terms).
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// First maximal digit run in `s`, or nullopt. Runs longer than 9 digits are
// treated as absent rather than overflowed.
inline std::optional<long> first_integer(std::string_view s) {
  size_t i = 0;
  while (i < s.size()) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j - i <= 9) return std::stol(std::string(s.substr(i, j - i)));
      i = j;
    } else {
      ++i;
    }
  }
  return std::nullopt;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seeded engine with deterministic cross-platform output. mt19937_64 output
// is pinned by the standard; seeding goes through seed_seq so that nearby
// integer seeds do not produce correlated first draws.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    std::seed_seq seq{static_cast<uint32_t>(seed & 0xffffffffu),
                      static_cast<uint32_t>(seed >> 32), 0x5f3759dfu, 0x9e3779b9u};
    engine_.seed(seq);
  }

  uint64_t next() { return engine_(); }

  // Uniform draw in [0, n) by rejection; avoids std::uniform_int_distribution,
  // whose output is implementation-defined.
  uint64_t bounded(uint64_t n) {
    if (n == 0) throw Error("Rng::bounded: n must be positive");
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

// Order-independent hash-based uniform in [0,1); used by the run simulator
// so that scores do not depend on evaluation order.
inline double hash_uniform01(uint64_t a, uint64_t b) {
  return static_cast<double>(splitmix64(a ^ splitmix64(b)) >> 11) * 0x1.0p-53;
}

}  // namespace stc
