#pragma once

// Reader for the TOML subset used by experiment configs: comments, bare and
// quoted keys, dotted keys, strings, integers, floats, booleans, one-line
// arrays of scalars, [tables] and [[arrays of tables]].

#include "json.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hams::toml_lite {

using json = nlohmann::ordered_json;

struct ParseError : std::runtime_error {
  ParseError(int line, const std::string& msg)
      : std::runtime_error("config line " + std::to_string(line) + ": " + msg), line(line) {}
  int line;
};

namespace detail {

class Cursor {
 public:
  Cursor(const std::string& s, int line) : s_(s), line_(line) {}

  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
  }
  bool done() {
    skip_ws();
    return i_ >= s_.size() || s_[i_] == '#';
  }
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  bool eat(char c) {
    skip_ws();
    if (peek() == c) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, msg); }

  std::string key_part() {
    skip_ws();
    if (peek() == '"') return quoted();
    std::string k;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' ||
                              s_[i_] == '-'))
      k += s_[i_++];
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key_part()};
    while (true) {
      skip_ws();
      if (peek() != '.') break;
      ++i_;
      parts.push_back(key_part());
    }
    return parts;
  }

  json value() {
    skip_ws();
    const char c = peek();
    if (c == '"') return quoted();
    if (c == '[') {
      ++i_;
      json arr = json::array();
      while (true) {
        skip_ws();
        if (eat(']')) break;
        arr.push_back(value());
        skip_ws();
        if (eat(',')) continue;
        expect(']');
        break;
      }
      return arr;
    }
    std::string tok;
    while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) && s_[i_] != ',' &&
           s_[i_] != ']' && s_[i_] != '#')
      tok += s_[i_++];
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.empty()) fail("expected a value");
    std::string clean;
    for (char ch : tok)
      if (ch != '_') clean += ch;
    const bool is_float = clean.find_first_of(".eE") != std::string::npos || clean == "inf" ||
                          clean == "+inf" || clean == "-inf" || clean == "nan";
    try {
      std::size_t used = 0;
      if (is_float) {
        const double d = std::stod(clean, &used);
        if (used == clean.size()) return d;
      } else {
        const long long v = std::stoll(clean, &used, 10);
        if (used == clean.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + tok + "'");
  }

 private:
  std::string quoted() {
    ++i_;
    std::string out;
    while (i_ < s_.size() && s_[i_] != '"') {
      char c = s_[i_++];
      if (c == '\\' && i_ < s_.size()) {
        const char e = s_[i_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (i_ >= s_.size()) fail("unterminated string");
    ++i_;
    return out;
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_;
};

inline json& descend(json& root, const std::vector<std::string>& path, int line) {
  json* node = &root;
  for (const auto& p : path) {
    if (!node->is_object()) throw ParseError(line, "'" + p + "' is nested under a non-table");
    json& next = (*node)[p];
    if (next.is_null()) next = json::object();
    if (next.is_array()) {
      if (next.empty() || !next.back().is_object())
        throw ParseError(line, "'" + p + "' is not a table");
      node = &next.back();
    } else {
      node = &next;
    }
  }
  return *node;
}

}  // namespace detail

inline json parse(const std::string& text) {
  json root = json::object();
  json* current = &root;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    detail::Cursor cur(raw, line);
    if (cur.done()) continue;
    if (cur.eat('[')) {
      const bool array_table = cur.eat('[');
      auto path = cur.dotted_key();
      cur.expect(']');
      if (array_table) cur.expect(']');
      if (!cur.done()) cur.fail("unexpected text after table header");
      const std::string last = path.back();
      path.pop_back();
      json& parent = detail::descend(root, path, line);
      if (array_table) {
        json& arr = parent[last];
        if (arr.is_null()) arr = json::array();
        if (!arr.is_array()) cur.fail("'" + last + "' is already defined as a table");
        arr.push_back(json::object());
        current = &arr.back();
      } else {
        if (parent.contains(last)) cur.fail("table '" + last + "' is defined twice");
        parent[last] = json::object();
        current = &parent[last];
      }
      continue;
    }
    auto key = cur.dotted_key();
    cur.expect('=');
    json v = cur.value();
    if (!cur.done()) cur.fail("unexpected text after value");
    const std::string last = key.back();
    key.pop_back();
    json& target = detail::descend(*current, key, line);
    if (target.contains(last)) cur.fail("key '" + last + "' is defined twice");
    target[last] = std::move(v);
  }
  return root;
}

inline json parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::ios_base::failure("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

}  // namespace hams::toml_lite
