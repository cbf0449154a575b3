#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "expomap/errors.hpp"

namespace expomap {

// Flat dotted-key configuration: one "key=value" per line, '#' comments.
// Keys are namespaced by dots (scene.seed, net.depth, train.epochs).
// Serialization emits keys in sorted order so identical settings produce
// identical bytes.
class Config {
 public:
  Config() = default;

  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void set_int(const std::string& key, std::int64_t v) { kv_[key] = std::to_string(v); }
  void set_double(const std::string& key, double v);
  void set_bool(const std::string& key, bool v) { kv_[key] = v ? "true" : "false"; }

  // Typed getters throw ValidationError naming the key on missing/bad values.
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::uint64_t> get_uint_list(const std::string& key,
                                           const std::vector<std::uint64_t>& fallback) const;

  // Keys under "prefix." (prefix itself excluded).
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  // Overlay: entries of `other` win.
  void merge(const Config& other);

  std::string serialize() const;
  void write_file(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace expomap
