#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "curricode/srcmodel/ast.hpp"
#include "curricode/srcmodel/lexer.hpp"
#include "curricode/srcmodel/parser.hpp"
#include "curricode/srcmodel/scope.hpp"

namespace curricode::src {

class InconsistentModel : public Error {
 public:
  using Error::Error;
};

/// A top-level body statement as a contiguous byte span. Simple statements
/// sharing a line through ';' form one node.
struct BodyNode {
  std::size_t begin = 0;  // start of the node's first line (inline bodies: first token)
  std::size_t end = 0;    // just past the NEWLINE closing its last line
  int depth = 1;
  std::string indent;
  int first_token = -1;
  int last_token = -1;
  int statements = 0;     // logical statements, nested ones included
};

/// A dead or generated line to insert: text plus nesting relative to the slot.
struct InsertedLine {
  int extra_depth = 0;
  std::string text;
};

inline int count_statements(const Block& block);

inline int count_statement(const Stmt& s) {
  int n = 1;
  for (const auto& b : s.blocks) n += count_statements(b);
  for (const auto& h : s.handlers) n += count_statements(h.body);
  if (s.def) n += count_statements(s.def->body);
  return n;
}

inline int count_statements(const Block& block) {
  int n = 0;
  for (const auto& s : block) n += count_statement(*s);
  return n;
}

class FunctionModel {
 public:
  FunctionModel() = default;

  [[nodiscard]] const std::string& text() const { return text_; }
  [[nodiscard]] const std::vector<Token>& tokens() const { return lex_->tokens; }
  [[nodiscard]] const LexResult& lexed() const { return *lex_; }
  [[nodiscard]] const FunctionDef& ast() const { return *ast_; }
  [[nodiscard]] int name_token() const { return ast_->name_tok; }
  [[nodiscard]] std::string_view name() const { return token_text(ast_->name_tok); }
  [[nodiscard]] std::string_view token_text(int tok) const {
    return lex_->tokens[static_cast<std::size_t>(tok)].text(text_);
  }
  [[nodiscard]] std::vector<std::string> params() const {
    std::vector<std::string> out;
    for (const auto& p : ast_->params) out.emplace_back(token_text(p.name_tok));
    return out;
  }
  [[nodiscard]] const std::vector<BodyNode>& body() const { return body_; }
  [[nodiscard]] std::size_t slot_count() const { return body_.size() + 1; }
  [[nodiscard]] int statement_count() const { return count_statements(ast_->body); }
  [[nodiscard]] bool inline_body() const { return ast_->inline_body; }

  // --- edits; applied by render() ------------------------------------------
  void replace_token(int tok, std::string replacement) {
    replacements_[tok] = std::move(replacement);
  }
  void insert_lines(std::size_t slot, std::vector<InsertedLine> lines) {
    if (slot > body_.size()) throw InconsistentModel("insertion slot out of range");
    auto& dst = insertions_[slot];
    for (auto& l : lines) dst.push_back(std::move(l));
  }
  [[nodiscard]] bool edited() const { return !replacements_.empty() || !insertions_.empty(); }

  [[nodiscard]] std::string render() const {
    struct Edit {
      std::size_t begin, end;
      std::string text;
    };
    std::vector<Edit> edits;
    for (const auto& [tok, rep] : replacements_) {
      const Token& t = lex_->tokens[static_cast<std::size_t>(tok)];
      edits.push_back({t.begin, t.end, rep});
    }
    const bool convert = ast_->inline_body && !insertions_.empty();
    if (convert) {
      // Move the inline suite onto its own line so statements can join it.
      const std::size_t colon_end = header_colon_end_;
      edits.push_back({colon_end, body_.front().begin, "\n" + body_indent_});
    }
    for (const auto& [slot, lines] : insertions_) {
      std::size_t at;
      std::string block;
      if (convert) {
        at = slot == 0 ? body_.front().begin : body_.back().end;
      } else {
        at = slot < body_.size() ? body_[slot].begin : body_.back().end;
      }
      const bool after_inline_start = convert && slot == 0;
      const bool missing_newline = at == text_.size() && (text_.empty() || text_.back() != '\n');
      for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = render_line(lines[i]);
        if (after_inline_start && i == 0) line = line.substr(body_indent_.size());
        if (missing_newline) block += "\n" + line;
        else block += line + "\n";
      }
      if (after_inline_start) block += body_indent_;
      edits.push_back({at, at, std::move(block)});
    }
    std::stable_sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) {
      return a.begin < b.begin || (a.begin == b.begin && a.end < b.end);
    });
    std::string out;
    out.reserve(text_.size() + 64);
    std::size_t pos = 0;
    for (const auto& e : edits) {
      if (e.begin < pos) throw InconsistentModel("overlapping edits");
      out.append(text_, pos, e.begin - pos);
      out += e.text;
      pos = e.end;
    }
    out.append(text_, pos, std::string::npos);
    return out;
  }

 private:
  friend FunctionModel build_model(std::string text);

  [[nodiscard]] std::string render_line(const InsertedLine& l) const {
    std::string s = body_indent_;
    for (int i = 0; i < l.extra_depth; ++i) s += indent_unit_;
    return s + l.text;
  }

  std::string text_;
  std::shared_ptr<const LexResult> lex_;
  std::shared_ptr<const FunctionDef> ast_;
  std::vector<BodyNode> body_;
  std::string body_indent_;
  std::string indent_unit_ = "    ";
  std::size_t header_colon_end_ = 0;
  std::map<int, std::string> replacements_;
  std::map<std::size_t, std::vector<InsertedLine>> insertions_;
};

inline FunctionModel build_model(std::string text) {
  FunctionModel m;
  m.text_ = std::move(text);
  auto lexed = std::make_shared<LexResult>(lex(m.text_));
  m.ast_ = parse_tokens(m.text_, *lexed);
  m.lex_ = std::move(lexed);
  const auto& toks = m.lex_->tokens;
  const auto& fn = *m.ast_;

  auto line_start = [&](std::size_t off) {
    while (off > 0 && m.text_[off - 1] != '\n') --off;
    return off;
  };
  const Token& def_tok = toks[static_cast<std::size_t>(fn.def_tok)];
  const std::string def_indent = m.text_.substr(line_start(def_tok.begin),
                                                def_tok.begin - line_start(def_tok.begin));

  const int first_body_tok = fn.body.front()->first_tok;
  // The header colon is the last significant main-stream token before the body.
  for (int i = first_body_tok - 1; i >= 0; --i) {
    const Token& t = toks[static_cast<std::size_t>(i)];
    if (t.kind == TokenKind::Op && t.text(m.text_) == ":") {
      m.header_colon_end_ = t.end;
      break;
    }
  }

  for (const auto& s : fn.body) {
    const Token& first = toks[static_cast<std::size_t>(s->first_tok)];
    const Token& last = toks[static_cast<std::size_t>(s->last_tok)];
    const bool joins = !m.body_.empty() &&
                       toks[static_cast<std::size_t>(m.body_.back().last_token)].kind !=
                           TokenKind::Newline;
    if (joins) {
      m.body_.back().end = last.end;
      m.body_.back().last_token = s->last_tok;
      m.body_.back().statements += count_statement(*s);
      continue;
    }
    BodyNode node;
    node.begin = fn.inline_body ? first.begin : line_start(first.begin);
    node.end = last.end;
    node.indent = fn.inline_body ? std::string() : m.text_.substr(node.begin, first.begin - node.begin);
    node.first_token = s->first_tok;
    node.last_token = s->last_tok;
    node.statements = count_statement(*s);
    m.body_.push_back(std::move(node));
  }
  if (fn.inline_body) {
    m.body_indent_ = def_indent + (def_indent.find('\t') != std::string::npos ? "\t" : "    ");
  } else {
    m.body_indent_ = m.body_.front().indent;
  }
  if (m.body_indent_.find('\t') != std::string::npos) m.indent_unit_ = "\t";
  return m;
}

struct ParsedFunction {
  FunctionModel model;
  ScopeTable scope;
};

/// Parses one function definition (decorators allowed) and resolves every
/// identifier occurrence.
inline ParsedFunction parse_function(std::string code) {
  ParsedFunction out;
  out.model = build_model(std::move(code));
  out.scope = analyze_scopes(out.model.text(), out.model.lexed(), out.model.ast());
  return out;
}

}  // namespace curricode::src
