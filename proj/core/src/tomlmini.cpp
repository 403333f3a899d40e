// SPDX-License-Identifier: Apache-2.0
#include "rollmini/tomlmini.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "rollmini/errors.hpp"

namespace rollmini::toml {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Strips a trailing comment, respecting double-quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

Value parse_scalar(const std::string& raw, int line_no) {
  const std::string text = trim(raw);
  if (text.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
  Value v;
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"')
      throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
    v.kind = Value::Kind::string;
    v.str = text.substr(1, text.size() - 2);
    return v;
  }
  if (text == "true" || text == "false") {
    v.kind = Value::Kind::boolean;
    v.boolean = text == "true";
    return v;
  }
  const bool looks_float = text.find('.') != std::string::npos || text.find('e') != std::string::npos ||
                           text.find('E') != std::string::npos;
  if (!looks_float) {
    int64_t i = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
    if (ec == std::errc() && ptr == text.data() + text.size()) {
      v.kind = Value::Kind::integer;
      v.integer = i;
      v.floating = static_cast<double>(i);
      return v;
    }
  }
  try {
    size_t used = 0;
    const double d = std::stod(text, &used);
    if (used == text.size()) {
      v.kind = Value::Kind::floating;
      v.floating = d;
      return v;
    }
  } catch (...) {
  }
  throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value '" + text + "'");
}

Value parse_value(const std::string& raw, int line_no) {
  const std::string text = trim(raw);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']')
      throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
    Value v;
    v.kind = Value::Kind::array;
    const std::string inner = text.substr(1, text.size() - 2);
    std::string item;
    bool in_string = false;
    for (char c : inner) {
      if (c == '"') in_string = !in_string;
      if (c == ',' && !in_string) {
        if (!trim(item).empty()) v.array.push_back(parse_scalar(item, line_no));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!trim(item).empty()) v.array.push_back(parse_scalar(item, line_no));
    return v;
  }
  return parse_scalar(text, line_no);
}

}  // namespace

Table Table::parse(const std::string& text) {
  Table table;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    const std::string qualified = section.empty() ? key : section + "." + key;
    if (table.entries_.count(qualified))
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + qualified + "'");
    table.entries_[qualified] = parse_value(line.substr(eq + 1), line_no);
  }
  return table;
}

Table Table::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse(buffer.str());
}

const Value* Table::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string Table::get_string(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::string) throw ConfigError("config: field '" + key + "' must be a string");
  return v->str;
}

std::string Table::require_string(const std::string& key) const {
  const Value* v = find(key);
  if (!v) throw ConfigError("config: missing required field '" + key + "'");
  if (v->kind != Value::Kind::string) throw ConfigError("config: field '" + key + "' must be a string");
  return v->str;
}

int64_t Table::get_int(const std::string& key, int64_t fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::integer) throw ConfigError("config: field '" + key + "' must be an integer");
  return v->integer;
}

double Table::get_double(const std::string& key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::integer && v->kind != Value::Kind::floating)
    throw ConfigError("config: field '" + key + "' must be a number");
  return v->floating;
}

bool Table::get_bool(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::boolean) throw ConfigError("config: field '" + key + "' must be a boolean");
  return v->boolean;
}

std::vector<std::string> Table::get_string_array(const std::string& key) const {
  const Value* v = find(key);
  if (!v) return {};
  if (v->kind != Value::Kind::array)
    throw ConfigError("config: field '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& item : v->array) {
    if (item.kind != Value::Kind::string)
      throw ConfigError("config: field '" + key + "' must be an array of strings");
    out.push_back(item.str);
  }
  return out;
}

std::vector<std::string> Table::subsections(const std::string& prefix) const {
  std::set<std::string> names;
  const std::string want = prefix + ".";
  for (const auto& [key, value] : entries_) {
    if (key.rfind(want, 0) != 0) continue;
    const std::string rest = key.substr(want.size());
    const size_t dot = rest.find('.');
    if (dot != std::string::npos) names.insert(rest.substr(0, dot));
  }
  return {names.begin(), names.end()};
}

}  // namespace rollmini::toml
