#pragma once

// Reader for the structured key-value dialect used by prescriptions and
// experiment configs: `key = value` lines, `[table]` headers, ordered
// `[[array-of-tables]]` blocks and `#` comments. Values are strings, numbers
// (including inf/nan), booleans, and possibly nested/multi-line arrays.
// Documents are returned as nlohmann::json objects.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rwsim/core/error.hpp"

namespace rwsim::io {

using Json = nlohmann::ordered_json;

namespace detail {

class KvParser {
 public:
  KvParser(std::string text, std::string source) : text_(std::move(text)), source_(std::move(source)) {}

  Json parse() {
    Json root = Json::object();
    Json* table = &root;
    while (true) {
      skip_space_and_comments(true);
      if (eof()) break;
      if (peek() == '[') {
        table = &open_table(root);
      } else {
        const std::string key = parse_key();
        skip_inline_space();
        expect('=');
        skip_inline_space();
        const int key_line = line_;
        Json value = parse_value();
        if (table->contains(key)) fail(key_line, "duplicate key '" + key + "'");
        (*table)[key] = std::move(value);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(int line, const std::string& what) const {
    throw ParseError(source_, line, what);
  }
  [[noreturn]] void fail(const std::string& what) const { fail(line_, what); }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }
  char get() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }

  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) get();
  }

  void skip_space_and_comments(bool newlines) {
    while (!eof()) {
      const char c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') get();
      } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
        get();
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_inline_space();
    if (peek() == '#') skip_space_and_comments(false);
    if (eof()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    get();
  }

  Json& open_table(Json& root) {
    get();
    const bool array = peek() == '[';
    if (array) get();
    skip_inline_space();
    const std::string name = parse_key();
    skip_inline_space();
    expect(']');
    if (array) {
      expect(']');
      Json& arr = root[name];
      if (arr.is_null()) arr = Json::array();
      if (!arr.is_array()) fail("'" + name + "' is not an array of tables");
      arr.push_back(Json::object());
      return arr.back();
    }
    if (root.contains(name)) fail("table [" + name + "] defined twice");
    root[name] = Json::object();
    return root[name];
  }

  std::string parse_key() {
    if (peek() == '"') return parse_string();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-')) {
      key += get();
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::string parse_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '"') break;
      if (c == '\\') {
        if (eof()) fail("unterminated escape");
        c = get();
        switch (c) {
          case 'n':
            out += '\n';
            break;
          case 't':
            out += '\t';
            break;
          case '"':
          case '\\':
            out += c;
            break;
          default:
            fail(std::string("unknown escape \\") + c);
        }
        continue;
      }
      out += c;
    }
    return out;
  }

  Json parse_value() {
    const char c = peek();
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    std::string word;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' ||
                      peek() == '+' || peek() == '-' || peek() == '_')) {
      word += get();
    }
    if (word.empty()) fail("expected a value");
    if (word == "true") return true;
    if (word == "false") return false;
    return parse_number(word);
  }

  Json parse_number(std::string word) {
    std::erase(word, '_');
    const bool neg = !word.empty() && word[0] == '-';
    std::string body = (word[0] == '-' || word[0] == '+') ? word.substr(1) : word;
    if (body == "inf") {
      return neg ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    }
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const bool integral = body.find_first_of(".eE") == std::string::npos;
    if (integral) {
      const long long v = std::strtoll(word.c_str(), &end, 10);
      if (end && *end == '\0') return v;
    }
    const double v = std::strtod(word.c_str(), &end);
    if (!end || *end != '\0') fail("invalid value '" + word + "'");
    return v;
  }

  Json parse_array() {
    expect('[');
    Json arr = Json::array();
    while (true) {
      skip_space_and_comments(true);
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(parse_value());
      skip_space_and_comments(true);
      if (peek() == ',') {
        get();
        continue;
      }
      if (peek() == ']') {
        get();
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  Json parse_inline_table() {
    expect('{');
    Json obj = Json::object();
    skip_inline_space();
    if (peek() == '}') {
      get();
      return obj;
    }
    while (true) {
      skip_inline_space();
      const std::string key = parse_key();
      skip_inline_space();
      expect('=');
      skip_inline_space();
      obj[key] = parse_value();
      skip_inline_space();
      if (peek() == ',') {
        get();
        continue;
      }
      expect('}');
      return obj;
    }
  }

  std::string text_;
  std::string source_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

inline Json parse_kv(const std::string& text, const std::string& source = "<string>") {
  return detail::KvParser(text, source).parse();
}

inline Json load_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv(ss.str(), path);
}

// Shortest text that reads back to the identical double (17 significant digits).
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// Typed field access with the field path in error messages.
inline double get_number(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError(path + "." + key + ": missing");
  const Json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

inline double get_number(const Json& obj, const std::string& key, const std::string& path,
                         double fallback) {
  return obj.contains(key) ? get_number(obj, key, path) : fallback;
}

inline std::string get_string(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError(path + "." + key + ": missing");
  const Json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline std::string get_string(const Json& obj, const std::string& key, const std::string& path,
                              const std::string& fallback) {
  return obj.contains(key) ? get_string(obj, key, path) : fallback;
}

inline bool get_bool(const Json& obj, const std::string& key, const std::string& path,
                     bool fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(path + "." + key + ": expected true or false");
  return v.get<bool>();
}

}  // namespace rwsim::io
