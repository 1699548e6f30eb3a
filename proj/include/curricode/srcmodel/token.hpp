#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "curricode/error.hpp"

namespace curricode::src {

enum class TokenKind {
  Name,
  Number,
  String,
  Op,
  Newline,  // end of a logical line
  NL,       // non-logical line break (blank line, inside brackets)
  Comment,
  Indent,
  Dedent,
  EndMarker,
};

struct Token {
  TokenKind kind = TokenKind::EndMarker;
  std::size_t begin = 0;  // byte span [begin, end) in the function text
  std::size_t end = 0;
  int line = 1;           // 1-based
  int col = 0;            // 0-based byte column
  int parent = -1;        // enclosing f-string token for tokens lexed from a
                          // replacement field, -1 in the main stream
  bool fstring = false;   // String tokens only

  [[nodiscard]] std::string_view text(std::string_view src) const {
    return src.substr(begin, end - begin);
  }
};

/// A replacement field `{expr...}` of an f-string: the expression byte range
/// and the tokens lexed from it (indices into the token vector).
struct FStringField {
  int string_token = -1;
  std::size_t expr_begin = 0;
  std::size_t expr_end = 0;
  int first_token = 0;
  int last_token = 0;  // exclusive
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, int line, int col)
      : Error("syntax error at " + std::to_string(line) + ":" +
              std::to_string(col) + ": " + what),
        line_(line),
        col_(col) {}
  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] int col() const { return col_; }

 private:
  int line_;
  int col_;
};

/// Raised for valid Python that lies outside the analyzable subset.
class SyntaxUnsupported : public Error {
 public:
  SyntaxUnsupported(std::string construct, int line, int col)
      : Error("unsupported construct '" + construct + "' at " +
              std::to_string(line) + ":" + std::to_string(col)),
        construct_(std::move(construct)),
        line_(line),
        col_(col) {}
  [[nodiscard]] const std::string& construct() const { return construct_; }
  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] int col() const { return col_; }

 private:
  std::string construct_;
  int line_;
  int col_;
};

class NotAFunction : public Error {
 public:
  explicit NotAFunction(const std::string& why)
      : Error("not a single function definition: " + why) {}
};

inline constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",     "assert", "async",
    "await", "break",  "class",   "continue", "def",    "del",    "elif",
    "else",  "except", "finally", "for",      "from",   "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",  "or",
    "pass",  "raise",  "return",  "try",      "while",  "with",   "yield"};

inline bool is_keyword(std::string_view word) {
  for (auto k : kKeywords)
    if (k == word) return true;
  return false;
}

}  // namespace curricode::src
