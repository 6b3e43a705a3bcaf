#pragma once

// Minimal [section] key = value configuration reader. Values are bare
// tokens or double-quoted strings; # starts a comment. Keys are addressed
// as "section.key". This intentionally covers only the subset the pipeline
// needs, with line-numbered errors.

#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "stc/common.hpp"

namespace stc {

class Config {
 public:
  static Config parse(std::istream& in) {
    Config cfg;
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) {
        // keep # inside quoted values
        bool quoted = false;
        size_t q1 = line.find('"');
        size_t q2 = line.rfind('"');
        if (q1 != std::string::npos && q1 < hash && q2 > hash) quoted = true;
        if (!quoted) line = line.substr(0, hash);
      }
      std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      std::string full = section.empty() ? key : section + "." + key;
      values_of(cfg)[full] = value;
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
  }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v) throw ConfigError("config: missing required key \"" + key + "\"");
    return *v;
  }

  long get_int_or(const std::string& key, long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    long out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
      throw ConfigError("config: key \"" + key + "\" is not an integer: " + *v);
    return out;
  }

  double get_double_or(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    double out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
      throw ConfigError("config: key \"" + key + "\" is not a number: " + *v);
    return out;
  }

  bool get_bool_or(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::string t = to_lower(*v);
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    throw ConfigError("config: key \"" + key + "\" is not a boolean: " + *v);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::map<std::string, std::string>& values_of(Config& c) { return c.values_; }
  std::map<std::string, std::string> values_;
};

}  // namespace stc
