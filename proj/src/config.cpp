#include "expomap/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace expomap {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) parts.push_back(trim(part));
  return parts;
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw ValidationError("config key '" + key + "': " + why);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    bad_key(key, "expected a number, got '" + value + "'");
  }
  if (pos != value.size()) bad_key(key, "trailing characters in '" + value + "'");
  return v;
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    bad_key(key, "expected an integer, got '" + value + "'");
  }
  if (pos != value.size()) bad_key(key, "trailing characters in '" + value + "'");
  return v;
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string raw;
  long line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key=value' in " + origin, line);
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("empty config key in " + origin, line);
    }
    cfg.kv_[key] = value;
  }
  return cfg;
}

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path.string());
}

void Config::set_double(const std::string& key, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  kv_[key] = buf;
}

std::string Config::get_string(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) bad_key(key, "missing required key");
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::int64_t Config::get_int(const std::string& key) const { return to_int(key, get_string(key)); }

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : to_int(key, it->second);
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(it->second, &pos);
  } catch (const std::exception&) {
    bad_key(key, "expected an unsigned integer, got '" + it->second + "'");
  }
  if (pos != it->second.size()) bad_key(key, "trailing characters in '" + it->second + "'");
  return v;
}

double Config::get_double(const std::string& key) const {
  return to_double(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : to_double(key, it->second);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_key(key, "expected a boolean, got '" + v + "'");
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& part : split_commas(get_string(key))) {
    out.push_back(static_cast<int>(to_int(key, part)));
  }
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      const std::vector<int>& fallback) const {
  return has(key) ? get_int_list(key) : fallback;
}

std::vector<std::uint64_t> Config::get_uint_list(
    const std::string& key, const std::vector<std::uint64_t>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::uint64_t> out;
  for (const std::string& part : split_commas(get_string(key))) {
    out.push_back(static_cast<std::uint64_t>(to_int(key, part)));
  }
  return out;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : kv_) {
    if (k.rfind(p, 0) == 0) out.push_back(k);
  }
  return out;
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.kv_) kv_[k] = v;
}

std::string Config::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : kv_) out << k << "=" << v << "\n";
  return out.str();
}

void Config::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open config file for writing: " + path.string());
  }
  out << serialize();
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

}  // namespace expomap
