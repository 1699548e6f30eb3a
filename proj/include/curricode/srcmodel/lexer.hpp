#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "curricode/srcmodel/token.hpp"

namespace curricode::src {

struct LexResult {
  std::vector<Token> tokens;  // main stream first, f-string sub-tokens after
  std::vector<FStringField> fields;
  int main_count = 0;         // tokens[0, main_count) form the main stream
};

namespace detail {

inline bool ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         c >= 0x80;
}
inline bool ident_char(unsigned char c) {
  return ident_start(c) || (c >= '0' && c <= '9');
}
inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Longest operators first.
inline constexpr std::string_view kOperators[] = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>",
    "<=",  ">=",  "==",  "!=",  "+=",  "-=", "*=", "/=", "%=", "&=", "|=",
    "^=",  "@=",  "(",   ")",   "[",   "]",  "{",  "}",  ":",  ",",  ";",
    ".",   "+",   "-",   "*",   "/",   "%",  "&",  "|",  "^",  "~",  "<",
    ">",   "=",   "@"};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < src_.size(); ++i)
      if (src_[i] == '\n') line_starts_.push_back(i + 1);
  }

  LexResult run() {
    lex_main();
    out_.main_count = static_cast<int>(out_.tokens.size());
    // Replacement fields are lexed after the main stream so that the main
    // stream stays contiguous; nested f-strings append further fields.
    for (std::size_t f = 0; f < pending_.size(); ++f) {
      Pending p = pending_[f];
      FStringField field;
      field.string_token = p.string_token;
      field.expr_begin = p.begin;
      field.expr_end = p.end;
      field.first_token = static_cast<int>(out_.tokens.size());
      lex_field(p.begin, p.end, p.string_token);
      field.last_token = static_cast<int>(out_.tokens.size());
      out_.fields.push_back(field);
    }
    return std::move(out_);
  }

 private:
  struct Pending {
    int string_token;
    std::size_t begin;
    std::size_t end;
  };

  [[nodiscard]] std::pair<int, int> line_col(std::size_t off) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), off);
    const auto line = static_cast<int>(it - line_starts_.begin());
    return {line, static_cast<int>(off - line_starts_[line - 1])};
  }

  [[noreturn]] void fail(const std::string& what, std::size_t off) const {
    auto [l, c] = line_col(off);
    throw SyntaxError(what, l, c);
  }

  int emit(TokenKind kind, std::size_t b, std::size_t e, int parent) {
    Token t;
    t.kind = kind;
    t.begin = b;
    t.end = e;
    std::tie(t.line, t.col) = line_col(b);
    t.parent = parent;
    out_.tokens.push_back(t);
    return static_cast<int>(out_.tokens.size()) - 1;
  }

  [[nodiscard]] char at(std::size_t i) const {
    return i < src_.size() ? src_[i] : '\0';
  }

  void lex_main() {
    std::vector<int> indents{0};
    std::size_t pos = 0;
    const std::size_t end = src_.size();
    int depth = 0;
    bool line_start = true;
    bool pending_newline = false;  // a significant token since last NEWLINE

    while (pos < end) {
      if (line_start && depth == 0) {
        const std::size_t ls = pos;
        int width = 0;
        while (pos < end && (src_[pos] == ' ' || src_[pos] == '\t' ||
                             src_[pos] == '\f')) {
          if (src_[pos] == '\t')
            width = (width / 8 + 1) * 8;
          else if (src_[pos] == ' ')
            ++width;
          else
            width = 0;
          ++pos;
        }
        const char c = at(pos);
        if (pos >= end || c == '\n' || c == '\r' || c == '#') {
          if (c == '#') {
            const std::size_t cb = pos;
            while (pos < end && src_[pos] != '\n' && src_[pos] != '\r') ++pos;
            emit(TokenKind::Comment, cb, pos, -1);
          }
          if (pos < end) {
            const std::size_t nb = pos;
            pos += (src_[pos] == '\r' && at(pos + 1) == '\n') ? 2 : 1;
            emit(TokenKind::NL, nb, pos, -1);
          }
          continue;
        }
        if (width > indents.back()) {
          indents.push_back(width);
          emit(TokenKind::Indent, ls, pos, -1);
        } else {
          while (width < indents.back()) {
            indents.pop_back();
            emit(TokenKind::Dedent, pos, pos, -1);
          }
          if (width != indents.back()) fail("inconsistent dedent", pos);
        }
        line_start = false;
      }

      const char c = src_[pos];
      if (c == ' ' || c == '\t' || c == '\f') {
        ++pos;
        continue;
      }
      if (c == '#') {
        const std::size_t cb = pos;
        while (pos < end && src_[pos] != '\n' && src_[pos] != '\r') ++pos;
        emit(TokenKind::Comment, cb, pos, -1);
        continue;
      }
      if (c == '\\') {
        std::size_t nx = pos + 1;
        if (at(nx) == '\r') ++nx;
        if (at(nx) != '\n') fail("unexpected character after line continuation", pos);
        pos = nx + 1;
        continue;
      }
      if (c == '\n' || c == '\r') {
        const std::size_t nb = pos;
        pos += (c == '\r' && at(pos + 1) == '\n') ? 2 : 1;
        if (depth > 0 || !pending_newline) {
          emit(TokenKind::NL, nb, pos, -1);
        } else {
          emit(TokenKind::Newline, nb, pos, -1);
          pending_newline = false;
        }
        if (depth == 0) line_start = true;
        continue;
      }
      pending_newline = true;
      pos = lex_token(pos, end, depth, -1);
    }
    if (depth > 0) fail("unclosed bracket at end of input", end);
    if (pending_newline) emit(TokenKind::Newline, end, end, -1);
    while (indents.size() > 1) {
      indents.pop_back();
      emit(TokenKind::Dedent, end, end, -1);
    }
    emit(TokenKind::EndMarker, end, end, -1);
  }

  // Expression text of an f-string field: implicit line joining applies.
  void lex_field(std::size_t begin, std::size_t end, int parent) {
    std::size_t pos = begin;
    int depth = 1;
    while (pos < end) {
      const char c = src_[pos];
      if (c == ' ' || c == '\t' || c == '\f' || c == '\n' || c == '\r') {
        ++pos;
        continue;
      }
      if (c == '#' || c == '\\') fail("invalid character in f-string expression", pos);
      pos = lex_token(pos, end, depth, parent);
    }
  }

  // Lexes one name/number/string/operator token starting at pos.
  std::size_t lex_token(std::size_t pos, std::size_t end, int& depth, int parent) {
    const auto c = static_cast<unsigned char>(src_[pos]);
    if (ident_start(c)) {
      std::size_t e = pos;
      while (e < end && ident_char(static_cast<unsigned char>(src_[e]))) ++e;
      const char q = e < end ? src_[e] : '\0';
      if ((q == '\'' || q == '"') && is_string_prefix(src_.substr(pos, e - pos)))
        return lex_string(pos, e, end, parent);
      emit(TokenKind::Name, pos, e, parent);
      return e;
    }
    if (is_digit(c) || (c == '.' && is_digit(static_cast<unsigned char>(at(pos + 1)))))
      return lex_number(pos, end, parent);
    if (c == '\'' || c == '"') return lex_string(pos, pos, end, parent);
    for (auto op : kOperators) {
      if (src_.substr(pos, op.size()) == op && pos + op.size() <= end) {
        if (op.size() == 1) {
          if (op[0] == '(' || op[0] == '[' || op[0] == '{') ++depth;
          if (op[0] == ')' || op[0] == ']' || op[0] == '}') {
            if (--depth < 0) fail("unmatched closing bracket", pos);
          }
        }
        emit(TokenKind::Op, pos, pos + op.size(), parent);
        return pos + op.size();
      }
    }
    if (c == '!' ) fail("unexpected '!'", pos);
    if (c == '$' || c == '?' || c == '`') fail("invalid character", pos);
    fail("unexpected character", pos);
  }

  static bool is_string_prefix(std::string_view p) {
    if (p.empty() || p.size() > 2) return false;
    std::string lower;
    for (char ch : p) lower.push_back(static_cast<char>(ch | 0x20));
    static constexpr std::string_view ok[] = {"r", "u", "b", "f", "br", "rb", "fr", "rf"};
    for (auto o : ok)
      if (o == lower) return true;
    return false;
  }

  std::size_t lex_number(std::size_t pos, std::size_t end, int parent) {
    std::size_t e = pos;
    auto digits = [&](auto pred) {
      while (e < end && (pred(static_cast<unsigned char>(src_[e])) || src_[e] == '_')) ++e;
    };
    if (src_[e] == '0' && e + 1 < end &&
        std::string_view("xXoObB").find(src_[e + 1]) != std::string_view::npos) {
      e += 2;
      digits([](unsigned char ch) { return std::isxdigit(ch) != 0; });
    } else {
      digits(is_digit);
      if (e < end && src_[e] == '.') {
        ++e;
        digits(is_digit);
      }
      if (e < end && (src_[e] == 'e' || src_[e] == 'E')) {
        std::size_t x = e + 1;
        if (x < end && (src_[x] == '+' || src_[x] == '-')) ++x;
        if (x < end && is_digit(static_cast<unsigned char>(src_[x]))) {
          e = x;
          digits(is_digit);
        }
      }
      if (e < end && (src_[e] == 'j' || src_[e] == 'J')) ++e;
    }
    if (e < end && ident_start(static_cast<unsigned char>(src_[e])))
      fail("invalid numeric literal", pos);
    emit(TokenKind::Number, pos, e, parent);
    return e;
  }

  std::size_t lex_string(std::size_t pos, std::size_t quote_pos, std::size_t end,
                         int parent) {
    bool raw = false;
    bool fstr = false;
    for (std::size_t i = pos; i < quote_pos; ++i) {
      const char ch = static_cast<char>(src_[i] | 0x20);
      if (ch == 'r') raw = true;
      if (ch == 'f') fstr = true;
    }
    const char q = src_[quote_pos];
    const bool triple = at(quote_pos + 1) == q && at(quote_pos + 2) == q;
    const std::size_t body = quote_pos + (triple ? 3 : 1);
    std::size_t i = body;
    std::size_t body_end = 0;
    for (;;) {
      if (i >= end) fail("unterminated string literal", pos);
      const char ch = src_[i];
      if (ch == '\\') {
        i += 2;
        continue;
      }
      if (!triple && (ch == '\n' || ch == '\r')) fail("unterminated string literal", pos);
      if (ch == q) {
        if (!triple) {
          body_end = i;
          i += 1;
          break;
        }
        if (at(i + 1) == q && at(i + 2) == q) {
          body_end = i;
          i += 3;
          break;
        }
      }
      ++i;
    }
    const int tok = emit(TokenKind::String, pos, i, parent);
    out_.tokens[tok].fstring = fstr;
    if (fstr) scan_fstring(tok, body, body_end, raw, q);
    return i;
  }

  // Finds replacement fields of an f-string body (pre-3.12 rules: nested
  // strings must use a different quote and no backslashes in expressions).
  void scan_fstring(int tok, std::size_t b, std::size_t e, bool raw, char quote) {
    std::size_t i = b;
    while (i < e) {
      const char ch = src_[i];
      if (ch == '\\' && !raw) {
        if (at(i + 1) == 'N' && at(i + 2) == '{') {
          i += 3;
          while (i < e && src_[i] != '}') ++i;
          ++i;
        } else {
          i += 2;
        }
        continue;
      }
      if (ch == '{') {
        if (at(i + 1) == '{') {
          i += 2;
          continue;
        }
        i = scan_field(tok, i + 1, e, raw, quote);
        continue;
      }
      if (ch == '}') {
        if (at(i + 1) != '}') fail("single '}' in f-string", i);
        i += 2;
        continue;
      }
      ++i;
    }
  }

  // Scans one field starting after '{'; returns the offset after its '}'.
  std::size_t scan_field(int tok, std::size_t i, std::size_t e, bool raw, char quote) {
    const std::size_t expr_begin = i;
    int depth = 0;
    std::size_t expr_end = std::string_view::npos;
    while (i < e) {
      const char ch = src_[i];
      if (ch == '\\') fail("backslash in f-string expression", i);
      if (ch == '\'' || ch == '"') {
        if (ch == quote) fail("reused quote in f-string expression", i);
        const bool triple = at(i + 1) == ch && at(i + 2) == ch;
        i += triple ? 3 : 1;
        while (i < e) {
          if (src_[i] == ch && (!triple || (at(i + 1) == ch && at(i + 2) == ch))) {
            i += triple ? 3 : 1;
            break;
          }
          ++i;
        }
        continue;
      }
      if (ch == '(' || ch == '[' || ch == '{') {
        ++depth;
      } else if (ch == ')' || ch == ']') {
        --depth;
      } else if (ch == '}') {
        if (depth == 0) {
          expr_end = i;
          break;
        }
        --depth;
      } else if (depth == 0 && ch == '!' && at(i + 1) != '=') {
        expr_end = i;
        break;
      } else if (depth == 0 && ch == ':') {
        expr_end = i;
        break;
      } else if (depth == 0 && ch == '=' && at(i + 1) != '=') {
        const char prev = i > expr_begin ? src_[i - 1] : '\0';
        if (prev != '=' && prev != '!' && prev != '<' && prev != '>') {
          auto [l, c] = line_col(i);
          throw SyntaxUnsupported("f-string debug specifier", l, c);
        }
      }
      ++i;
    }
    if (expr_end == std::string_view::npos) fail("unterminated f-string field", expr_begin);
    pending_.push_back({tok, expr_begin, expr_end});
    i = expr_end;
    if (src_[i] == '!') {
      i += 2;  // conversion character
    }
    if (i < e && src_[i] == ':') {
      ++i;
      while (i < e && src_[i] != '}') {
        if (src_[i] == '{') {
          i = scan_field(tok, i + 1, e, raw, quote);
          continue;
        }
        ++i;
      }
    }
    if (i >= e || src_[i] != '}') fail("unterminated f-string field", expr_begin);
    return i + 1;
  }

  std::string_view src_;
  std::vector<std::size_t> line_starts_;
  LexResult out_;
  std::vector<Pending> pending_;
};

}  // namespace detail

inline LexResult lex(std::string_view src) { return detail::Lexer(src).run(); }

}  // namespace curricode::src
