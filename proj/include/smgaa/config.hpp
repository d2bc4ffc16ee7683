#pragma once

// Flat `section.key = value` configuration files. Values are stored as text;
// typed accessors parse on read and report the offending key on failure.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace smgaa {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T out{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
  } else if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
      throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    }
    return out;
  }
}

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& is, const std::string& origin = "<stream>") {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto a = line.find_first_not_of(" \t\r");
      if (a == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      auto key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file: " + path.string());
    return parse(is, path.string());
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write config file: " + path.string());
    os << to_string();
  }

  std::string to_string() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  template <typename T>
  T get(const std::string& key, const T& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_value<T>(key, it->second);
  }

  template <typename T>
  T require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key: " + key);
    return parse_value<T>(key, it->second);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, const char* value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format_double(value); }
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }
  template <typename I>
    requires std::is_integral_v<I>
  void set(const std::string& key, I value) {
    values_[key] = std::to_string(value);
  }

  /// Values of `other` override ours.
  void merge(const Config& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  friend bool operator==(const Config&, const Config&) = default;

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
};

/// Comma-separated list of doubles, e.g. "0,0,0,-1,0,0,-1".
inline std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a == std::string::npos) throw ConfigError("config key '" + key + "': empty list element");
    out.push_back(parse_value<double>(key, item.substr(a, b - a + 1)));
  }
  return out;
}

template <typename Range>
std::string format_double_list(const Range& values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ',';
    out += format_double(v);
  }
  return out;
}

}  // namespace smgaa
