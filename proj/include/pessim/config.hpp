#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace pessim {

/// Flat typed key-value document: `[section]` headers, `key = value` lines,
/// `#` comments. Values are booleans, integers, reals, double-quoted strings
/// or single-line arrays of those. Keys are addressed as "section.key".
class Config {
 public:
  using Scalar = std::variant<bool, std::int64_t, double, std::string>;
  using Value = std::variant<Scalar, std::vector<Scalar>>;

  /// Throws InvalidInput with the line number on malformed input.
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::vector<std::string> keys() const;

  bool get_bool(const std::string& key, bool fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  /// Integers are accepted where reals are expected.
  double get_double(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  /// Throws InvalidInput naming the first key outside `known`.
  void require_known(const std::set<std::string>& known) const;

  /// Canonical JSON view (keys sorted), used for hashing.
  nlohmann::json to_json() const;

 private:
  const Value* find(const std::string& key) const;
  std::map<std::string, Value> values_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);

/// Sixteen lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace pessim
