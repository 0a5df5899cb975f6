#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "opekit/multiindex.hpp"

namespace opekit {

class ParseError : public std::invalid_argument {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::invalid_argument("parse error at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

namespace detail {

class OpParser {
 public:
  explicit OpParser(std::string_view text, std::size_t base = 0) : s_(text), base_(base) {}

  CompositeOp parse_op() {
    skip_ws();
    if (peek() == '1') {
      ++pos_;
      skip_ws();
      expect_end();
      return CompositeOp::identity();
    }
    std::vector<MultiIndex> factors;
    parse_factor(factors);
    skip_ws();
    while (peek() == '*') {
      ++pos_;
      skip_ws();
      parse_factor(factors);
      skip_ws();
    }
    expect_end();
    return CompositeOp(std::move(factors));
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, base_ + pos_); }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void expect_end() {
    if (pos_ != s_.size()) fail(std::string("unexpected character '") + s_[pos_] + "'");
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  void expect_word(std::string_view w) {
    if (s_.substr(pos_, w.size()) != w) fail("expected \"" + std::string(w) + "\"");
    pos_ += w.size();
  }
  int parse_int() {
    if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected nonnegative integer");
    long v = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (s_[pos_] - '0');
      if (v > 64) fail("integer too large");
      ++pos_;
    }
    return static_cast<int>(v);
  }
  void parse_factor(std::vector<MultiIndex>& out) {
    MultiIndex a;
    if (peek() == 'd') {
      ++pos_;
      expect('[');
      for (int mu = 0; mu < 4; ++mu) {
        skip_ws();
        a[mu] = parse_int();
        skip_ws();
        if (mu < 3) expect(',');
      }
      expect(']');
    }
    expect_word("phi");
    int power = 1;
    if (peek() == '^') {
      ++pos_;
      power = parse_int();
      if (power < 1) fail("power must be at least 1");
    }
    for (int k = 0; k < power; ++k) out.push_back(a);
  }

  std::string_view s_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline CompositeOp parse_op(std::string_view text) { return detail::OpParser(text).parse_op(); }

// Comma-separated operator list; offsets in errors refer to the whole string.
inline std::vector<CompositeOp> parse_op_list(std::string_view text) {
  std::vector<CompositeOp> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = text.find(',', start);
    // Commas inside d[...] belong to the factor.
    std::size_t depth_scan = start;
    int depth = 0;
    comma = std::string_view::npos;
    for (; depth_scan < text.size(); ++depth_scan) {
      char c = text[depth_scan];
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        comma = depth_scan;
        break;
      }
    }
    auto piece = text.substr(start, comma == std::string_view::npos ? text.size() - start : comma - start);
    out.push_back(detail::OpParser(piece, start).parse_op());
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace opekit
