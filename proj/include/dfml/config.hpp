#pragma once

// Line-oriented key=value configuration. '#' starts a comment line; blank
// lines are ignored. Every key must be read by the consumer, otherwise
// `check_all_used` reports it as unknown.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dfml/error.hpp"
#include "dfml/random.hpp"
#include "dfml/tensor.hpp"

namespace dfml {

namespace detail {
inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}
}  // namespace detail

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is, const std::string& source = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const std::string t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ParseError(source + ":" + std::to_string(line_no) + ": expected key=value");
      const std::string key = detail::trim(t.substr(0, eq));
      if (key.empty()) throw ParseError(source + ":" + std::to_string(line_no) + ": empty key");
      if (cfg.values_.count(key))
        throw ParseError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
      cfg.values_[key] = detail::trim(t.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    return parse(in, path);
  }

  static KeyValueConfig from_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  /// Overrides (or adds) a key; used for command-line flags.
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  void erase(const std::string& key) { values_.erase(key); }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return get_string(key, ""), fallback;
    const std::string v = get_string(key, "");
    try {
      return parse_double(v);
    } catch (const ParseError&) {
      throw ParseError("key '" + key + "': expected a number, got '" + v + "'");
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    if (!has(key)) return get_string(key, ""), fallback;
    return parse_int(key, get_string(key, ""));
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return get_string(key, ""), fallback;
    const std::string v = get_string(key, "");
    std::uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ParseError("key '" + key + "': expected an unsigned integer, got '" + v + "'");
    return out;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return get_string(key, ""), fallback;
    const std::string v = get_string(key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError("key '" + key + "': expected true/false, got '" + v + "'");
  }

  /// Comma-separated integers.
  std::vector<long long> get_int_list(const std::string& key, const std::vector<long long>& fallback) const {
    if (!has(key)) return get_string(key, ""), fallback;
    std::vector<long long> out;
    std::stringstream ss(get_string(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(key, detail::trim(item)));
    if (out.empty()) throw ParseError("key '" + key + "': empty list");
    return out;
  }

  void check_all_used() const {
    std::string unknown;
    for (const auto& [key, value] : values_)
      if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    if (!unknown.empty()) throw InvalidArgument("unknown config keys: " + unknown);
  }

  /// Sorted "key=value" lines; the input to `hash`.
  std::string canonical() const {
    std::string out;
    for (const auto& [key, value] : values_) out += key + "=" + value + "\n";
    return out;
  }

  std::uint64_t hash() const { return fnv1a64(canonical()); }

  std::string hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
  }

 private:
  static long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ParseError("key '" + key + "': expected an integer, got '" + v + "'");
    return out;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace dfml
