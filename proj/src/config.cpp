#include "pessim/config.hpp"

#include "pessim/common.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pessim {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(int line, const std::string& message) {
  throw InvalidInput("config line " + std::to_string(line) + ": " + message);
}

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

/// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

Config::Scalar parse_scalar(const std::string& raw, int line) {
  const std::string t = trim(raw);
  if (t.empty()) fail(line, "missing value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') fail(line, "unterminated string");
    const std::string body = t.substr(1, t.size() - 2);
    if (body.find('"') != std::string::npos) fail(line, "embedded quote in string");
    return body;
  }
  if (t == "true") return true;
  if (t == "false") return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  const bool integral = t.find_first_of(".eEn") == std::string::npos;
  if (integral) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && p == last) return v;
  }
  double v = 0.0;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec == std::errc() && p == last) return v;
  fail(line, "cannot parse value '" + t + "'");
}

std::vector<std::string> split_array(const std::string& body, int line) {
  std::vector<std::string> items;
  std::string current;
  bool quoted = false;
  for (char c : body) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  if (quoted) fail(line, "unterminated string in array");
  if (!trim(current).empty()) items.push_back(current);
  else if (!items.empty()) fail(line, "trailing comma in array");
  return items;
}

nlohmann::json scalar_json(const Config::Scalar& s) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, s);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string t = trim(strip_comment(raw));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(line, "malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!valid_name(section)) fail(line, "invalid section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (!valid_name(key)) fail(line, "invalid key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full)) fail(line, "duplicate key '" + full + "'");
    const std::string value = trim(t.substr(eq + 1));
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') fail(line, "unterminated array");
      std::vector<Scalar> items;
      for (const auto& item : split_array(value.substr(1, value.size() - 2), line))
        items.push_back(parse_scalar(item, line));
      cfg.values_[full] = items;
    } else {
      cfg.values_[full] = parse_scalar(value, line);
    }
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& kv : values_) out.push_back(kv.first);
  return out;
}

const Config::Value* Config::find(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

namespace {

const Config::Scalar& as_scalar(const Config::Value& v, const std::string& key) {
  if (const auto* s = std::get_if<Config::Scalar>(&v)) return *s;
  throw InvalidInput("config key '" + key + "' must be a scalar");
}

double scalar_double(const Config::Scalar& s, const std::string& key) {
  if (const auto* d = std::get_if<double>(&s)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
  throw InvalidInput("config key '" + key + "' must be a number");
}

std::int64_t scalar_int(const Config::Scalar& s, const std::string& key) {
  if (const auto* i = std::get_if<std::int64_t>(&s)) return *i;
  throw InvalidInput("config key '" + key + "' must be an integer");
}

std::vector<Config::Scalar> as_list(const Config::Value& v) {
  if (const auto* l = std::get_if<std::vector<Config::Scalar>>(&v)) return *l;
  return {std::get<Config::Scalar>(v)};
}

}  // namespace

bool Config::get_bool(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* b = std::get_if<bool>(&as_scalar(*v, key))) return *b;
  throw InvalidInput("config key '" + key + "' must be a boolean");
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const Value* v = find(key);
  return v ? scalar_int(as_scalar(*v, key), key) : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const Value* v = find(key);
  return v ? scalar_double(as_scalar(*v, key), key) : fallback;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* s = std::get_if<std::string>(&as_scalar(*v, key))) return *s;
  throw InvalidInput("config key '" + key + "' must be a string");
}

std::vector<std::int64_t> Config::get_int_list(const std::string& key,
                                               const std::vector<std::int64_t>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  for (const auto& s : as_list(*v)) out.push_back(scalar_int(s, key));
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& s : as_list(*v)) out.push_back(scalar_double(s, key));
  return out;
}

void Config::require_known(const std::set<std::string>& known) const {
  for (const auto& kv : values_) {
    if (!known.count(kv.first)) throw InvalidInput("unknown config key '" + kv.first + "'");
  }
}

nlohmann::json Config::to_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, value] : values_) {
    if (const auto* s = std::get_if<Scalar>(&value)) {
      out[key] = scalar_json(*s);
    } else {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& item : std::get<std::vector<Scalar>>(value)) arr.push_back(scalar_json(item));
      out[key] = arr;
    }
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace pessim
