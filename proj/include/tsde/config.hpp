#pragma once

// Structured key-value configuration: a TOML-subset reader covering sections,
// dotted keys, inline tables, numeric arrays, strings, and booleans.  Every
// entry is flattened to a dotted path.  Typed getters mark keys as consumed so
// callers can reject unknown (misspelled) keys wholesale, and a canonical
// serialization provides a stable content hash for replay provenance.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tsde/errors.hpp"

namespace tsde {

struct ConfigValue {
  enum class Kind { number, boolean, string, number_list };
  Kind kind = Kind::number;
  double number = 0.0;
  bool integral = false;  // written without '.', exponent, or sign tricks
  bool boolean = false;
  std::string text;
  std::vector<double> list;
  std::vector<bool> list_integral;

  static ConfigValue make_number(double v, bool is_integral) {
    ConfigValue c;
    c.kind = Kind::number;
    c.number = v;
    c.integral = is_integral;
    return c;
  }
  static ConfigValue make_bool(bool v) {
    ConfigValue c;
    c.kind = Kind::boolean;
    c.boolean = v;
    return c;
  }
  static ConfigValue make_string(std::string v) {
    ConfigValue c;
    c.kind = Kind::string;
    c.text = std::move(v);
    return c;
  }
};

namespace detail {

inline bool valid_key(std::string_view k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  bool prev_dot = false;
  for (char ch : k) {
    if (ch == '.') {
      if (prev_dot) return false;
      prev_dot = true;
      continue;
    }
    prev_dot = false;
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '_' || ch == '-';
    if (!ok) return false;
  }
  return true;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::string format_number(double v, bool integral) {
  char buf[64];
  if (integral) {
    const auto r = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
    return std::string(buf, r.ptr);
  }
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Splits "a = 1, b = 2" at top-level commas (ignoring commas nested inside
// strings, arrays, or inner tables).
inline std::vector<std::string_view> split_top_level(std::string_view body, char sep) {
  std::vector<std::string_view> parts;
  int depth = 0;
  bool in_string = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char ch = body[i];
    if (in_string) {
      if (ch == '\\') {
        ++i;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == '[' || ch == '{') {
      ++depth;
    } else if (ch == ']' || ch == '}') {
      --depth;
    } else if (ch == sep && depth == 0) {
      parts.push_back(body.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.push_back(body.substr(start));
  return parts;
}

}  // namespace detail

class Config {
 public:
  Config() = default;

  static Config parse_string(std::string_view text) {
    Config cfg;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t eol = text.find('\n', pos);
      std::string_view raw = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                            : eol - pos);
      pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
      ++line_no;
      std::string_view line = detail::trim(strip_comment(raw, line_no));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw config_error("line " + std::to_string(line_no) + ": malformed section header");
        const auto name = detail::trim(line.substr(1, line.size() - 2));
        if (!detail::valid_key(name))
          throw config_error("line " + std::to_string(line_no) + ": invalid section name '" +
                             std::string(name) + "'");
        section = std::string(name);
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos)
        throw config_error("line " + std::to_string(line_no) + ": expected 'key = value'");
      const auto key = detail::trim(line.substr(0, eq));
      if (!detail::valid_key(key))
        throw config_error("line " + std::to_string(line_no) + ": invalid key '" +
                           std::string(key) + "'");
      const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
      cfg.insert_value(full, detail::trim(line.substr(eq + 1)), line_no, false);
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      return parse_string(buf.str());
    } catch (const config_error& e) {
      throw config_error(path + ": " + e.what());
    }
  }

  // "experiment.m=20000" — applied after parse, last wins.  A right-hand side
  // that parses as no other kind is taken as a bare (unquoted) string so shell
  // users need not quote problem ids.
  void apply_override(std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos)
      throw config_error("override '" + std::string(assignment) + "' is not key=value");
    const auto key = detail::trim(assignment.substr(0, eq));
    if (!detail::valid_key(key))
      throw config_error("override has invalid key '" + std::string(key) + "'");
    const auto rhs = detail::trim(assignment.substr(eq + 1));
    if (rhs.empty())
      throw config_error("override '" + std::string(assignment) + "' has empty value");
    ConfigValue v;
    try {
      v = parse_value(rhs, 0);
    } catch (const config_error&) {
      v = ConfigValue::make_string(std::string(rhs));
    }
    entries_[std::string(key)] = std::move(v);
  }

  void set(const std::string& key, ConfigValue v) { entries_[key] = std::move(v); }

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  double get_number(const std::string& key) const {
    const auto& v = fetch(key, ConfigValue::Kind::number, "number");
    return v.number;
  }
  double get_number(const std::string& key, double fallback) const {
    return contains(key) ? get_number(key) : fallback;
  }

  std::int64_t get_integer(const std::string& key) const {
    const auto& v = fetch(key, ConfigValue::Kind::number, "number");
    const double d = v.number;
    const auto i = static_cast<std::int64_t>(d);
    if (static_cast<double>(i) != d)
      throw config_error("key '" + key + "': expected an integer, got " +
                         detail::format_number(d, false));
    return i;
  }
  std::int64_t get_integer(const std::string& key, std::int64_t fallback) const {
    return contains(key) ? get_integer(key) : fallback;
  }

  bool get_bool(const std::string& key) const {
    return fetch(key, ConfigValue::Kind::boolean, "boolean").boolean;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    return contains(key) ? get_bool(key) : fallback;
  }

  std::string get_string(const std::string& key) const {
    return fetch(key, ConfigValue::Kind::string, "string").text;
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    return contains(key) ? get_string(key) : fallback;
  }

  std::vector<double> get_number_list(const std::string& key) const {
    return fetch(key, ConfigValue::Kind::number_list, "array of numbers").list;
  }
  std::vector<double> get_number_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    return contains(key) ? get_number_list(key) : fallback;
  }

  // Keys present in the file that no getter ever asked for.
  std::vector<std::string> unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (consumed_.count(k) == 0) out.push_back(k);
    return out;
  }

  void require_fully_consumed() const {
    const auto leftover = unconsumed();
    if (leftover.empty()) return;
    std::string msg = "unknown key(s):";
    for (const auto& k : leftover) msg += " " + k;
    throw config_error(msg);
  }

  // Deterministic serialization: sorted dotted keys, shortest round-trip
  // numbers.  Itself parseable, so hash(parse(canonical)) == hash.
  std::string canonical_string() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
      out += k;
      out += "=";
      switch (v.kind) {
        case ConfigValue::Kind::number:
          out += detail::format_number(v.number, v.integral);
          break;
        case ConfigValue::Kind::boolean:
          out += v.boolean ? "true" : "false";
          break;
        case ConfigValue::Kind::string:
          out += "\"" + v.text + "\"";
          break;
        case ConfigValue::Kind::number_list: {
          out += "[";
          for (std::size_t i = 0; i < v.list.size(); ++i) {
            if (i) out += ",";
            out += detail::format_number(v.list[i], v.list_integral[i]);
          }
          out += "]";
          break;
        }
      }
      out += "\n";
    }
    return out;
  }

  // FNV-1a 64-bit over the canonical serialization, as 16 hex digits.
  std::string hash_hex() const {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : canonical_string()) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    char buf[17];
    for (int i = 15; i >= 0; --i) {
      buf[i] = "0123456789abcdef"[h & 0xF];
      h >>= 4;
    }
    return std::string(buf, 16);
  }

  const std::map<std::string, ConfigValue>& entries() const { return entries_; }

 private:
  static std::string_view strip_comment(std::string_view line, std::size_t line_no) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (in_string) {
        if (ch == '\\') {
          ++i;
        } else if (ch == '"') {
          in_string = false;
        }
        continue;
      }
      if (ch == '"') in_string = true;
      if (ch == '#') return line.substr(0, i);
    }
    if (in_string)
      throw config_error("line " + std::to_string(line_no) + ": unterminated string");
    return line;
  }

  static ConfigValue parse_value(std::string_view text, std::size_t line_no) {
    text = detail::trim(text);
    if (text.empty())
      throw config_error("line " + std::to_string(line_no) + ": empty value");
    if (text == "true") return ConfigValue::make_bool(true);
    if (text == "false") return ConfigValue::make_bool(false);
    if (text.front() == '"') {
      if (text.size() < 2 || text.back() != '"')
        throw config_error("line " + std::to_string(line_no) + ": unterminated string");
      std::string out;
      for (std::size_t i = 1; i + 1 < text.size(); ++i) {
        if (text[i] == '\\' && i + 2 < text.size()) {
          const char next = text[i + 1];
          if (next == '"' || next == '\\') {
            out += next;
            ++i;
            continue;
          }
        }
        if (text[i] == '"')
          throw config_error("line " + std::to_string(line_no) +
                             ": trailing characters after string");
        out += text[i];
      }
      return ConfigValue::make_string(std::move(out));
    }
    if (text.front() == '[') {
      if (text.back() != ']')
        throw config_error("line " + std::to_string(line_no) + ": unterminated array");
      ConfigValue v;
      v.kind = ConfigValue::Kind::number_list;
      const auto body = detail::trim(text.substr(1, text.size() - 2));
      if (body.empty()) return v;
      for (auto part : detail::split_top_level(body, ',')) {
        part = detail::trim(part);
        if (part.empty()) continue;  // tolerate a trailing comma
        const ConfigValue elem = parse_value(part, line_no);
        if (elem.kind != ConfigValue::Kind::number)
          throw config_error("line " + std::to_string(line_no) +
                             ": arrays may contain numbers only");
        v.list.push_back(elem.number);
        v.list_integral.push_back(elem.integral);
      }
      return v;
    }
    if (text.front() == '{')
      throw config_error("line " + std::to_string(line_no) +
                         ": inline table not allowed in this position");
    double d = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), d);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
      throw config_error("line " + std::to_string(line_no) + ": cannot parse value '" +
                         std::string(text) + "'");
    const bool integral = text.find('.') == std::string_view::npos &&
                          text.find('e') == std::string_view::npos &&
                          text.find('E') == std::string_view::npos;
    return ConfigValue::make_number(d, integral);
  }

  void insert_value(const std::string& full_key, std::string_view rhs, std::size_t line_no,
                    bool from_table) {
    rhs = detail::trim(rhs);
    if (!rhs.empty() && rhs.front() == '{') {
      if (rhs.back() != '}')
        throw config_error("line " + std::to_string(line_no) + ": unterminated inline table");
      const auto body = detail::trim(rhs.substr(1, rhs.size() - 2));
      if (body.empty()) return;
      for (auto part : detail::split_top_level(body, ',')) {
        part = detail::trim(part);
        if (part.empty())
          throw config_error("line " + std::to_string(line_no) +
                             ": empty entry in inline table");
        const std::size_t eq = part.find('=');
        if (eq == std::string_view::npos)
          throw config_error("line " + std::to_string(line_no) +
                             ": inline table entry is not key = value");
        const auto sub = detail::trim(part.substr(0, eq));
        if (!detail::valid_key(sub))
          throw config_error("line " + std::to_string(line_no) + ": invalid key '" +
                             std::string(sub) + "'");
        insert_value(full_key + "." + std::string(sub), detail::trim(part.substr(eq + 1)),
                     line_no, true);
      }
      return;
    }
    if (entries_.count(full_key))
      throw config_error("line " + std::to_string(line_no) + ": duplicate key '" + full_key +
                         "'");
    (void)from_table;
    entries_[full_key] = parse_value(rhs, line_no);
  }

  const ConfigValue& fetch(const std::string& key, ConfigValue::Kind kind,
                           const char* kind_name) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw config_error("missing required key '" + key + "'");
    consumed_.insert(key);
    if (it->second.kind != kind)
      throw config_error("key '" + key + "': expected " + std::string(kind_name));
    return it->second;
  }

  std::map<std::string, ConfigValue> entries_;
  mutable std::set<std::string> consumed_;
};

}  // namespace tsde
