// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rollmini::toml {

/// Minimal TOML-subset reader covering what run configs need: [a.b]
/// sections, string/int/float/bool scalars, single-line arrays of scalars,
/// and # comments. Keys are stored section-qualified ("train.learning_rate").
struct Value {
  enum class Kind { string, integer, floating, boolean, array };
  Kind kind = Kind::string;
  std::string str;
  int64_t integer = 0;
  double floating = 0.0;
  bool boolean = false;
  std::vector<Value> array;
};

class Table {
 public:
  static Table parse(const std::string& text);
  static Table parse_file(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_string_array(const std::string& key) const;

  /// Section names directly under `prefix` (e.g. prefix "mapping" yields
  /// "actor_train" for key "mapping.actor_train.devices").
  std::vector<std::string> subsections(const std::string& prefix) const;

  const std::map<std::string, Value>& entries() const { return entries_; }

 private:
  const Value* find(const std::string& key) const;
  std::map<std::string, Value> entries_;
};

}  // namespace rollmini::toml
