#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "curricode/srcmodel/ast.hpp"
#include "curricode/srcmodel/lexer.hpp"

namespace curricode::src {

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const LexResult& lex, std::vector<int> stream)
      : src_(src), lex_(lex), stream_(std::move(stream)) {
    for (std::size_t f = 0; f < lex_.fields.size(); ++f)
      fields_by_string_[lex_.fields[f].string_token].push_back(static_cast<int>(f));
  }

  Parser(std::string_view src, const LexResult& lex, std::vector<int> stream,
         const std::unordered_map<int, std::vector<int>>& fields)
      : src_(src), lex_(lex), stream_(std::move(stream)), fields_by_string_(fields) {}

  std::unique_ptr<FunctionDef> parse_file() {
    bool indented = false;
    if (at_kind(TokenKind::Indent)) {
      indented = true;
      advance();
    }
    auto decorators = parse_decorators();
    if (at_kw("async")) unsupported("async function");
    if (at_kw("class")) throw NotAFunction("found a class definition");
    if (!at_kw("def")) throw NotAFunction("expected 'def'");
    auto fn = parse_funcdef(std::move(decorators));
    if (indented) {
      if (!at_kind(TokenKind::Dedent)) throw NotAFunction("trailing code after the function");
      advance();
    }
    if (!at_kind(TokenKind::EndMarker)) throw NotAFunction("trailing code after the function");
    return fn;
  }

  ExprPtr parse_field_expression() {
    ExprPtr e = at_kw("yield") ? parse_yield() : parse_testlist_star_expr();
    if (!at_end()) fail("unexpected token in f-string expression");
    return e;
  }

 private:
  // --- token access ---------------------------------------------------------
  [[nodiscard]] bool at_end() const { return pos_ >= stream_.size(); }
  [[nodiscard]] int index(std::size_t k = 0) const {
    return pos_ + k < stream_.size() ? stream_[pos_ + k] : -1;
  }
  [[nodiscard]] const Token* token(std::size_t k = 0) const {
    const int i = index(k);
    return i < 0 ? nullptr : &lex_.tokens[static_cast<std::size_t>(i)];
  }
  [[nodiscard]] std::string_view text(std::size_t k = 0) const {
    const Token* t = token(k);
    return t ? t->text(src_) : std::string_view{};
  }
  [[nodiscard]] bool at_kind(TokenKind kind, std::size_t k = 0) const {
    const Token* t = token(k);
    return t && t->kind == kind;
  }
  [[nodiscard]] bool at_op(std::string_view op, std::size_t k = 0) const {
    return at_kind(TokenKind::Op, k) && text(k) == op;
  }
  [[nodiscard]] bool at_kw(std::string_view kw, std::size_t k = 0) const {
    return at_kind(TokenKind::Name, k) && text(k) == kw;
  }
  [[nodiscard]] bool at_name(std::size_t k = 0) const {
    return at_kind(TokenKind::Name, k) && !is_keyword(text(k));
  }
  int advance() { return stream_[pos_++]; }
  [[nodiscard]] int previous() const { return pos_ == 0 ? -1 : stream_[pos_ - 1]; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token* t = token();
    if (!t && !stream_.empty()) t = &lex_.tokens[static_cast<std::size_t>(stream_.back())];
    throw SyntaxError(what, t ? t->line : 1, t ? t->col : 0);
  }
  [[noreturn]] void unsupported(const std::string& construct) const {
    const Token* t = token();
    throw SyntaxUnsupported(construct, t ? t->line : 1, t ? t->col : 0);
  }
  int expect_op(std::string_view op) {
    if (!at_op(op)) fail("expected '" + std::string(op) + "'");
    return advance();
  }
  int expect_kw(std::string_view kw) {
    if (!at_kw(kw)) fail("expected '" + std::string(kw) + "'");
    return advance();
  }
  int expect_name() {
    if (!at_name()) fail("expected a name");
    return advance();
  }
  int expect_kind(TokenKind kind, const char* what) {
    if (!at_kind(kind)) fail(std::string("expected ") + what);
    return advance();
  }

  static ExprPtr make(ExprKind kind, int tok = -1) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->tok = tok;
    return e;
  }

  // --- statements -----------------------------------------------------------
  std::vector<ExprPtr> parse_decorators() {
    std::vector<ExprPtr> out;
    while (at_op("@")) {
      advance();
      out.push_back(parse_namedexpr_test());
      expect_kind(TokenKind::Newline, "newline after decorator");
    }
    return out;
  }

  std::unique_ptr<FunctionDef> parse_funcdef(std::vector<ExprPtr> decorators) {
    auto fn = std::make_unique<FunctionDef>();
    fn->decorators = std::move(decorators);
    fn->def_tok = expect_kw("def");
    fn->name_tok = expect_name();
    expect_op("(");
    fn->params = parse_params(")", true);
    expect_op(")");
    if (at_op("->")) {
      advance();
      fn->returns = parse_test();
    }
    expect_op(":");
    fn->body = parse_suite(&fn->inline_body);
    return fn;
  }

  std::vector<Param> parse_params(std::string_view closer, bool annotations) {
    std::vector<Param> out;
    while (!at_op(closer)) {
      if (at_op("/")) {
        advance();
      } else if (at_op("*")) {
        advance();
        if (at_name()) {
          Param p;
          p.kind = Param::Kind::VarArgs;
          p.name_tok = advance();
          if (annotations && at_op(":")) {
            advance();
            p.annotation = parse_test();
          }
          out.push_back(std::move(p));
        }
      } else if (at_op("**")) {
        advance();
        Param p;
        p.kind = Param::Kind::KwArgs;
        p.name_tok = expect_name();
        if (annotations && at_op(":")) {
          advance();
          p.annotation = parse_test();
        }
        out.push_back(std::move(p));
      } else {
        Param p;
        p.name_tok = expect_name();
        if (annotations && at_op(":")) {
          advance();
          p.annotation = parse_test();
        }
        if (at_op("=")) {
          advance();
          p.default_value = parse_test();
        }
        out.push_back(std::move(p));
      }
      if (!at_op(",")) break;
      advance();
    }
    return out;
  }

  Block parse_suite(bool* inline_body = nullptr) {
    Block block;
    if (at_kind(TokenKind::Newline)) {
      advance();
      expect_kind(TokenKind::Indent, "an indented block");
      while (!at_kind(TokenKind::Dedent)) {
        if (at_end() || at_kind(TokenKind::EndMarker)) fail("unexpected end of input");
        parse_statement(block);
      }
      advance();
      if (inline_body) *inline_body = false;
    } else {
      parse_simple_line(block);
      if (inline_body) *inline_body = true;
    }
    return block;
  }

  bool is_match_statement() const {
    if (!at_kw("match") || at_op("=", 1) || at_op(".", 1)) return false;
    for (std::size_t k = 1; index(k) >= 0; ++k) {
      if (at_kind(TokenKind::Newline, k)) return at_op(":", k - 1);
    }
    return false;
  }

  void parse_statement(Block& block) {
    const int first = index();
    auto finish = [&](StmtPtr s) {
      s->first_tok = first;
      s->last_tok = previous();
      block.push_back(std::move(s));
    };
    if (at_op("@") || at_kw("def")) {
      auto decorators = parse_decorators();
      if (at_kw("class")) unsupported("class definition");
      if (at_kw("async")) unsupported("async function");
      auto s = std::make_unique<Stmt>();
      s->kind = StmtKind::FunctionDef;
      s->def = parse_funcdef(std::move(decorators));
      return finish(std::move(s));
    }
    if (at_kw("class")) unsupported("class definition");
    if (at_kw("async")) unsupported("async statement");
    if (is_match_statement()) unsupported("match statement");
    if (at_kw("if")) {
      auto s = std::make_unique<Stmt>();
      s->kind = StmtKind::If;
      advance();
      s->exprs.push_back(parse_namedexpr_test());
      expect_op(":");
      s->blocks.push_back(parse_suite());
      while (at_kw("elif")) {
        advance();
        s->exprs.push_back(parse_namedexpr_test());
        expect_op(":");
        s->blocks.push_back(parse_suite());
      }
      parse_else(*s);
      return finish(std::move(s));
    }
    if (at_kw("while")) {
      auto s = std::make_unique<Stmt>();
      s->kind = StmtKind::While;
      advance();
      s->exprs.push_back(parse_namedexpr_test());
      expect_op(":");
      s->blocks.push_back(parse_suite());
      parse_else(*s);
      return finish(std::move(s));
    }
    if (at_kw("for")) {
      auto s = std::make_unique<Stmt>();
      s->kind = StmtKind::For;
      advance();
      s->exprs.push_back(parse_exprlist());
      expect_kw("in");
      s->exprs.push_back(parse_testlist_star_expr());
      expect_op(":");
      s->blocks.push_back(parse_suite());
      parse_else(*s);
      return finish(std::move(s));
    }
    if (at_kw("with")) {
      auto s = std::make_unique<Stmt>();
      s->kind = StmtKind::With;
      advance();
      for (;;) {
        WithItem item;
        item.context = parse_test();
        if (at_kw("as")) {
          advance();
          item.target = parse_expr();
        }
        s->items.push_back(std::move(item));
        if (!at_op(",")) break;
        advance();
      }
      expect_op(":");
      s->blocks.push_back(parse_suite());
      return finish(std::move(s));
    }
    if (at_kw("try")) {
      auto s = std::make_unique<Stmt>();
      s->kind = StmtKind::Try;
      advance();
      expect_op(":");
      s->blocks.push_back(parse_suite());
      while (at_kw("except")) {
        advance();
        if (at_op("*")) unsupported("except*");
        Handler h;
        if (!at_op(":")) {
          h.type = parse_test();
          if (at_kw("as")) {
            advance();
            h.name_tok = expect_name();
          }
        }
        expect_op(":");
        h.body = parse_suite();
        s->handlers.push_back(std::move(h));
      }
      parse_else(*s);
      if (at_kw("finally")) {
        advance();
        expect_op(":");
        s->blocks.push_back(parse_suite());
        s->has_finally = true;
      }
      if (s->handlers.empty() && !s->has_finally) fail("try without except or finally");
      return finish(std::move(s));
    }
    parse_simple_line(block);
  }

  void parse_else(Stmt& s) {
    if (!at_kw("else")) return;
    advance();
    expect_op(":");
    s.blocks.push_back(parse_suite());
    s.has_else = true;
  }

  void parse_simple_line(Block& block) {
    for (;;) {
      const int first = index();
      auto s = parse_small_statement();
      s->first_tok = first;
      s->last_tok = previous();
      block.push_back(std::move(s));
      if (at_op(";")) {
        advance();
        if (at_kind(TokenKind::Newline)) break;
        continue;
      }
      break;
    }
    block.back()->last_tok = expect_kind(TokenKind::Newline, "end of statement");
  }

  [[nodiscard]] bool at_statement_end() const {
    return at_end() || at_op(";") || at_kind(TokenKind::Newline);
  }

  StmtPtr parse_small_statement() {
    auto s = std::make_unique<Stmt>();
    if (at_kw("pass") || at_kw("break") || at_kw("continue")) {
      s->kind = text() == "pass" ? StmtKind::Pass
                : text() == "break" ? StmtKind::Break
                                    : StmtKind::Continue;
      advance();
      return s;
    }
    if (at_kw("return")) {
      s->kind = StmtKind::Return;
      advance();
      if (!at_statement_end()) s->exprs.push_back(parse_testlist_star_expr());
      return s;
    }
    if (at_kw("raise")) {
      s->kind = StmtKind::Raise;
      advance();
      if (!at_statement_end()) {
        s->exprs.push_back(parse_test());
        if (at_kw("from")) {
          advance();
          s->exprs.push_back(parse_test());
        }
      }
      return s;
    }
    if (at_kw("global") || at_kw("nonlocal")) {
      s->kind = text() == "global" ? StmtKind::Global : StmtKind::Nonlocal;
      advance();
      s->names.push_back(expect_name());
      while (at_op(",")) {
        advance();
        s->names.push_back(expect_name());
      }
      return s;
    }
    if (at_kw("del")) {
      s->kind = StmtKind::Del;
      advance();
      s->exprs.push_back(parse_exprlist());
      return s;
    }
    if (at_kw("assert")) {
      s->kind = StmtKind::Assert;
      advance();
      s->exprs.push_back(parse_test());
      if (at_op(",")) {
        advance();
        s->exprs.push_back(parse_test());
      }
      return s;
    }
    if (at_kw("import")) {
      s->kind = StmtKind::Import;
      advance();
      for (;;) {
        ImportAlias alias;
        alias.path.push_back(expect_name());
        while (at_op(".")) {
          advance();
          alias.path.push_back(expect_name());
        }
        if (at_kw("as")) {
          advance();
          alias.as_tok = expect_name();
        }
        s->aliases.push_back(std::move(alias));
        if (!at_op(",")) break;
        advance();
      }
      return s;
    }
    if (at_kw("from")) {
      s->kind = StmtKind::ImportFrom;
      advance();
      while (at_op(".") || at_op("...")) advance();
      if (at_name()) {
        s->names.push_back(advance());
        while (at_op(".")) {
          advance();
          s->names.push_back(expect_name());
        }
      }
      expect_kw("import");
      if (at_op("*")) unsupported("star import");
      const bool paren = at_op("(");
      if (paren) advance();
      for (;;) {
        ImportAlias alias;
        alias.path.push_back(expect_name());
        if (at_kw("as")) {
          advance();
          alias.as_tok = expect_name();
        }
        s->aliases.push_back(std::move(alias));
        if (!at_op(",")) break;
        advance();
        if (paren && at_op(")")) break;
      }
      if (paren) expect_op(")");
      return s;
    }

    ExprPtr first = at_kw("yield") ? parse_yield() : parse_testlist_star_expr();
    if (at_op("=")) {
      s->kind = StmtKind::Assign;
      s->exprs.push_back(std::move(first));
      while (at_op("=")) {
        advance();
        s->exprs.push_back(at_kw("yield") ? parse_yield() : parse_testlist_star_expr());
      }
      return s;
    }
    static constexpr std::string_view aug[] = {"+=", "-=", "*=", "/=", "//=", "%=", "**=",
                                               ">>=", "<<=", "&=", "|=", "^=", "@="};
    for (auto op : aug) {
      if (at_op(op)) {
        s->kind = StmtKind::AugAssign;
        advance();
        s->exprs.push_back(std::move(first));
        s->exprs.push_back(at_kw("yield") ? parse_yield() : parse_testlist_star_expr());
        return s;
      }
    }
    if (at_op(":")) {
      s->kind = StmtKind::AnnAssign;
      advance();
      s->exprs.push_back(std::move(first));
      s->exprs.push_back(parse_test());
      if (at_op("=")) {
        advance();
        s->exprs.push_back(at_kw("yield") ? parse_yield() : parse_testlist_star_expr());
      }
      return s;
    }
    s->kind = StmtKind::Expr;
    s->exprs.push_back(std::move(first));
    return s;
  }

  // --- expressions ----------------------------------------------------------
  [[nodiscard]] bool can_start_expression() const {
    const Token* t = token();
    if (!t) return false;
    switch (t->kind) {
      case TokenKind::Name: {
        auto w = text();
        return !is_keyword(w) || w == "not" || w == "lambda" || w == "None" ||
               w == "True" || w == "False" || w == "await" || w == "yield";
      }
      case TokenKind::Number:
      case TokenKind::String:
        return true;
      case TokenKind::Op: {
        auto w = text();
        return w == "(" || w == "[" || w == "{" || w == "-" || w == "+" || w == "~" ||
               w == "*" || w == "...";
      }
      default:
        return false;
    }
  }

  ExprPtr parse_test_or_star() {
    if (at_op("*")) {
      advance();
      auto e = make(ExprKind::Starred);
      e->children.push_back(parse_expr());
      return e;
    }
    return parse_namedexpr_test();
  }

  // Comma-separated list; a trailing comma or more than one item makes a tuple.
  template <class ItemFn>
  ExprPtr parse_list(ItemFn item) {
    ExprPtr first = item();
    if (!at_op(",")) return first;
    auto tuple = make(ExprKind::Tuple);
    tuple->children.push_back(std::move(first));
    while (at_op(",")) {
      advance();
      if (!can_start_expression() || at_kw("yield")) break;
      tuple->children.push_back(item());
    }
    return tuple;
  }

  ExprPtr parse_testlist_star_expr() {
    return parse_list([this] { return parse_test_or_star(); });
  }

  ExprPtr parse_exprlist() {
    return parse_list([this]() -> ExprPtr {
      if (at_op("*")) {
        advance();
        auto e = make(ExprKind::Starred);
        e->children.push_back(parse_expr());
        return e;
      }
      return parse_expr();
    });
  }

  ExprPtr parse_namedexpr_test() {
    if (at_name() && at_op(":=", 1)) {
      auto e = make(ExprKind::NamedExpr, advance());
      advance();
      e->children.push_back(parse_test());
      return e;
    }
    return parse_test();
  }

  ExprPtr parse_test() {
    if (at_kw("lambda")) return parse_lambda();
    ExprPtr body = parse_or_test();
    if (!at_kw("if")) return body;
    advance();
    auto e = make(ExprKind::Operation);
    e->children.push_back(std::move(body));
    e->children.push_back(parse_or_test());
    expect_kw("else");
    e->children.push_back(parse_test());
    return e;
  }

  ExprPtr parse_test_nocond() {
    if (at_kw("lambda")) return parse_lambda();
    return parse_or_test();
  }

  ExprPtr parse_lambda() {
    expect_kw("lambda");
    auto e = make(ExprKind::Lambda);
    e->params = parse_params(":", false);
    expect_op(":");
    e->children.push_back(parse_test());
    return e;
  }

  template <class Next, class Pred>
  ExprPtr parse_binary(Next next, Pred is_op) {
    ExprPtr left = (this->*next)();
    if (!is_op()) return left;
    auto e = make(ExprKind::Operation);
    e->children.push_back(std::move(left));
    while (is_op()) {
      if (at_kw("not") && at_kw("in", 1)) advance();
      if (at_kw("is") && at_kw("not", 1)) advance();
      advance();
      e->children.push_back((this->*next)());
    }
    return e;
  }

  ExprPtr parse_or_test() {
    return parse_binary(&Parser::parse_and_test, [this] { return at_kw("or"); });
  }
  ExprPtr parse_and_test() {
    return parse_binary(&Parser::parse_not_test, [this] { return at_kw("and"); });
  }
  ExprPtr parse_not_test() {
    if (!at_kw("not")) return parse_comparison();
    advance();
    auto e = make(ExprKind::Operation);
    e->children.push_back(parse_not_test());
    return e;
  }
  ExprPtr parse_comparison() {
    return parse_binary(&Parser::parse_expr, [this] {
      return at_op("<") || at_op(">") || at_op("==") || at_op(">=") || at_op("<=") ||
             at_op("!=") || at_kw("in") || at_kw("is") || (at_kw("not") && at_kw("in", 1));
    });
  }
  ExprPtr parse_expr() {
    return parse_binary(&Parser::parse_xor_expr, [this] { return at_op("|"); });
  }
  ExprPtr parse_xor_expr() {
    return parse_binary(&Parser::parse_and_expr, [this] { return at_op("^"); });
  }
  ExprPtr parse_and_expr() {
    return parse_binary(&Parser::parse_shift_expr, [this] { return at_op("&"); });
  }
  ExprPtr parse_shift_expr() {
    return parse_binary(&Parser::parse_arith_expr,
                        [this] { return at_op("<<") || at_op(">>"); });
  }
  ExprPtr parse_arith_expr() {
    return parse_binary(&Parser::parse_term, [this] { return at_op("+") || at_op("-"); });
  }
  ExprPtr parse_term() {
    return parse_binary(&Parser::parse_factor, [this] {
      return at_op("*") || at_op("/") || at_op("%") || at_op("//") || at_op("@");
    });
  }
  ExprPtr parse_factor() {
    if (at_op("+") || at_op("-") || at_op("~")) {
      advance();
      auto e = make(ExprKind::Operation);
      e->children.push_back(parse_factor());
      return e;
    }
    return parse_power();
  }
  ExprPtr parse_power() {
    if (at_kw("await")) unsupported("await");
    ExprPtr base = parse_primary();
    if (!at_op("**")) return base;
    advance();
    auto e = make(ExprKind::Operation);
    e->children.push_back(std::move(base));
    e->children.push_back(parse_factor());
    return e;
  }

  ExprPtr parse_primary() {
    ExprPtr e = parse_atom();
    for (;;) {
      if (at_op("(")) {
        advance();
        auto call = make(ExprKind::Call);
        call->children.push_back(std::move(e));
        parse_arguments(*call);
        expect_op(")");
        e = std::move(call);
      } else if (at_op("[")) {
        advance();
        auto sub = make(ExprKind::Subscript);
        sub->children.push_back(std::move(e));
        for (;;) {
          sub->children.push_back(parse_subscript());
          if (!at_op(",")) break;
          advance();
          if (at_op("]")) break;
        }
        expect_op("]");
        e = std::move(sub);
      } else if (at_op(".")) {
        advance();
        auto attr = make(ExprKind::Attribute);
        attr->children.push_back(std::move(e));
        if (!at_kind(TokenKind::Name)) fail("expected attribute name");
        attr->tok = advance();
        e = std::move(attr);
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_subscript() {
    auto slice = make(ExprKind::Operation);
    bool is_slice = false;
    if (!at_op(":")) {
      ExprPtr lower = at_op("*") ? parse_test_or_star() : parse_namedexpr_test();
      if (!at_op(":")) return lower;
      slice->children.push_back(std::move(lower));
    }
    while (at_op(":")) {
      is_slice = true;
      advance();
      if (!at_op(":") && !at_op("]") && !at_op(",")) slice->children.push_back(parse_test());
    }
    (void)is_slice;
    return slice;
  }

  void parse_arguments(Expr& call) {
    while (!at_op(")")) {
      Arg arg;
      if (at_op("*")) {
        advance();
        arg.kind = Arg::Kind::Star;
        arg.value = parse_test();
      } else if (at_op("**")) {
        advance();
        arg.kind = Arg::Kind::DoubleStar;
        arg.value = parse_test();
      } else if (at_kind(TokenKind::Name) && at_op("=", 1)) {
        arg.kind = Arg::Kind::Keyword;
        arg.keyword_tok = advance();
        advance();
        arg.value = parse_test();
      } else {
        ExprPtr value = parse_namedexpr_test();
        if (at_kw("for") || at_kw("async")) value = parse_comprehension(std::move(value));
        arg.value = std::move(value);
      }
      call.args.push_back(std::move(arg));
      if (!at_op(",")) break;
      advance();
    }
  }

  ExprPtr parse_comprehension(ExprPtr element, ExprPtr value = nullptr) {
    auto comp = make(ExprKind::Comprehension);
    comp->children.push_back(std::move(element));
    if (value) comp->children.push_back(std::move(value));
    while (at_kw("for") || at_kw("async")) {
      if (at_kw("async")) unsupported("async comprehension");
      advance();
      Generator g;
      g.target = parse_exprlist();
      expect_kw("in");
      g.iter = parse_or_test();
      while (at_kw("if")) {
        advance();
        g.ifs.push_back(parse_test_nocond());
      }
      comp->generators.push_back(std::move(g));
    }
    return comp;
  }

  ExprPtr parse_yield() {
    expect_kw("yield");
    auto e = make(ExprKind::Yield);
    if (at_kw("from")) {
      advance();
      e->children.push_back(parse_test());
    } else if (can_start_expression()) {
      e->children.push_back(parse_testlist_star_expr());
    }
    return e;
  }

  ExprPtr parse_display(std::string_view closer) {
    auto tuple = make(ExprKind::Tuple);
    if (at_op(closer)) {
      advance();
      return tuple;
    }
    ExprPtr first = parse_test_or_star();
    if (at_kw("for") || at_kw("async")) {
      auto comp = parse_comprehension(std::move(first));
      expect_op(closer);
      return comp;
    }
    if (closer == ")" && !at_op(",")) {
      expect_op(")");
      return first;
    }
    tuple->children.push_back(std::move(first));
    while (at_op(",")) {
      advance();
      if (at_op(closer)) break;
      tuple->children.push_back(parse_test_or_star());
    }
    expect_op(closer);
    return tuple;
  }

  ExprPtr parse_brace_display() {
    auto display = make(ExprKind::Operation);
    if (at_op("}")) {
      advance();
      return display;
    }
    bool first = true;
    for (;;) {
      if (at_op("**")) {
        advance();
        display->children.push_back(parse_expr());
      } else {
        ExprPtr key = parse_test_or_star();
        ExprPtr value;
        if (at_op(":")) {
          advance();
          value = parse_test();
        }
        if (first && (at_kw("for") || at_kw("async"))) {
          auto comp = parse_comprehension(std::move(key), std::move(value));
          expect_op("}");
          return comp;
        }
        display->children.push_back(std::move(key));
        if (value) display->children.push_back(std::move(value));
      }
      first = false;
      if (!at_op(",")) break;
      advance();
      if (at_op("}")) break;
    }
    expect_op("}");
    return display;
  }

  ExprPtr parse_atom() {
    if (at_op("(")) {
      advance();
      if (at_kw("yield")) {
        auto y = parse_yield();
        expect_op(")");
        return y;
      }
      return parse_display(")");
    }
    if (at_op("[")) {
      advance();
      return parse_display("]");
    }
    if (at_op("{")) {
      advance();
      return parse_brace_display();
    }
    if (at_op("...") || at_kind(TokenKind::Number)) return make(ExprKind::Literal, advance());
    if (at_kind(TokenKind::String)) return parse_strings();
    if (at_kind(TokenKind::Name)) {
      const auto w = text();
      if (w == "None" || w == "True" || w == "False") return make(ExprKind::Literal, advance());
      if (is_keyword(w)) fail("unexpected keyword '" + std::string(w) + "'");
      return make(ExprKind::Name, advance());
    }
    fail("unexpected token");
  }

  ExprPtr parse_strings() {
    auto fs = make(ExprKind::FString);
    bool any_f = false;
    const int first = index();
    while (at_kind(TokenKind::String)) {
      const int tok = advance();
      if (!lex_.tokens[static_cast<std::size_t>(tok)].fstring) continue;
      any_f = true;
      auto it = fields_by_string_.find(tok);
      if (it == fields_by_string_.end()) continue;
      for (int f : it->second) {
        const FStringField& field = lex_.fields[static_cast<std::size_t>(f)];
        std::vector<int> sub;
        for (int t = field.first_token; t < field.last_token; ++t) sub.push_back(t);
        if (sub.empty()) {
          const Token& st = lex_.tokens[static_cast<std::size_t>(tok)];
          throw SyntaxError("empty expression in f-string", st.line, st.col);
        }
        Parser inner(src_, lex_, std::move(sub), fields_by_string_);
        fs->children.push_back(inner.parse_field_expression());
      }
    }
    if (!any_f) return make(ExprKind::Literal, first);
    return fs;
  }

  std::string_view src_;
  const LexResult& lex_;
  std::vector<int> stream_;
  std::size_t pos_ = 0;
  std::unordered_map<int, std::vector<int>> fields_by_string_;
};

}  // namespace detail

/// Parses a single function definition from lexed source. Comments and
/// non-logical line breaks are skipped; every token index in the returned
/// tree refers into `lex.tokens`.
inline std::unique_ptr<FunctionDef> parse_tokens(std::string_view src, const LexResult& lex) {
  std::vector<int> stream;
  for (int i = 0; i < lex.main_count; ++i) {
    const auto k = lex.tokens[static_cast<std::size_t>(i)].kind;
    if (k != TokenKind::NL && k != TokenKind::Comment) stream.push_back(i);
  }
  return detail::Parser(src, lex, std::move(stream)).parse_file();
}

}  // namespace curricode::src
