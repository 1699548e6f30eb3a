#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "curricode/srcmodel/ast.hpp"
#include "curricode/srcmodel/lexer.hpp"

namespace curricode::src {

enum class Role {
  FunctionName,
  Parameter,
  Local,
  NestedDefName,
  ComprehensionTarget,
  External,
  AttributeName,
  KeywordArgName,
  KeywordOrBuiltin,
  StringContent,
};

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::FunctionName: return "function-name";
    case Role::Parameter: return "parameter";
    case Role::Local: return "local";
    case Role::NestedDefName: return "nested-def-name";
    case Role::ComprehensionTarget: return "comprehension-target";
    case Role::External: return "free/external";
    case Role::AttributeName: return "attribute-name";
    case Role::KeywordArgName: return "keyword-arg-name";
    case Role::KeywordOrBuiltin: return "keyword/builtin";
    case Role::StringContent: return "string-content";
  }
  return "?";
}

inline constexpr std::string_view kBuiltins[] = {
    "ArithmeticError", "AssertionError", "AttributeError", "BaseException", "BlockingIOError",
    "BrokenPipeError", "BufferError", "BytesWarning", "ChildProcessError",
    "ConnectionAbortedError", "ConnectionError", "ConnectionRefusedError",
    "ConnectionResetError", "DeprecationWarning", "EOFError", "Ellipsis", "EncodingWarning",
    "EnvironmentError", "Exception", "FileExistsError", "FileNotFoundError",
    "FloatingPointError", "FutureWarning", "GeneratorExit", "IOError", "ImportError",
    "ImportWarning", "IndentationError", "IndexError", "InterruptedError", "IsADirectoryError",
    "KeyError", "KeyboardInterrupt", "LookupError", "MemoryError", "ModuleNotFoundError",
    "NameError", "NotADirectoryError", "NotImplemented", "NotImplementedError", "OSError",
    "OverflowError", "PendingDeprecationWarning", "PermissionError", "ProcessLookupError",
    "RecursionError", "ReferenceError", "ResourceWarning", "RuntimeError", "RuntimeWarning",
    "StopAsyncIteration", "StopIteration", "SyntaxError", "SyntaxWarning", "SystemError",
    "SystemExit", "TabError", "TimeoutError", "TypeError", "UnboundLocalError",
    "UnicodeDecodeError", "UnicodeEncodeError", "UnicodeError", "UnicodeTranslateError",
    "UnicodeWarning", "UserWarning", "ValueError", "Warning", "ZeroDivisionError",
    "__debug__", "__doc__", "__import__", "__name__", "abs", "aiter", "all", "anext", "any",
    "ascii", "bin", "bool", "breakpoint", "bytearray", "bytes", "callable", "chr",
    "classmethod", "compile", "complex", "copyright", "credits", "delattr", "dict", "dir",
    "divmod", "enumerate", "eval", "exec", "exit", "filter", "float", "format", "frozenset",
    "getattr", "globals", "hasattr", "hash", "help", "hex", "id", "input", "int",
    "isinstance", "issubclass", "iter", "len", "license", "list", "locals", "map", "max",
    "memoryview", "min", "next", "object", "oct", "open", "ord", "pow", "print", "property",
    "quit", "range", "repr", "reversed", "round", "set", "setattr", "slice", "sorted",
    "staticmethod", "str", "sum", "super", "tuple", "type", "vars", "zip"};

inline bool is_builtin(std::string_view name) {
  return std::binary_search(std::begin(kBuiltins), std::end(kBuiltins), name);
}

/// One classified Name or String token.
struct Occurrence {
  int token = -1;
  Role role = Role::KeywordOrBuiltin;
  int group = -1;  // binding group id, -1 for roles without one
};

struct BindingGroup {
  int id = -1;
  std::string name;
  Role role = Role::Local;
  bool renameable = false;
  bool module_level = false;    // resolves outside the function
  int definition_token = -1;    // first binding site (first occurrence if unbound)
  std::vector<int> occurrences; // token indices in source order
};

struct ScopeTable {
  std::vector<Occurrence> occurrences;  // source order
  std::vector<BindingGroup> groups;     // ordered by first occurrence

  [[nodiscard]] const Occurrence* find(int token) const {
    auto it = index_.find(token);
    return it == index_.end() ? nullptr : &occurrences[it->second];
  }

  /// Names the function reads from its enclosing module or the builtins,
  /// excluding its own name.
  [[nodiscard]] std::set<std::string> free_names() const {
    std::set<std::string> out;
    for (const auto& g : groups)
      if (g.module_level && g.role != Role::FunctionName) out.insert(g.name);
    return out;
  }

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < occurrences.size(); ++i) index_[occurrences[i].token] = i;
  }

 private:
  std::unordered_map<int, std::size_t> index_;
};

namespace detail {

class ScopeAnalyzer {
 public:
  ScopeAnalyzer(std::string_view src, const LexResult& lex) : src_(src), lex_(lex) {}

  ScopeTable run(const FunctionDef& fn) {
    scopes_.push_back(ScopeInfo{ScopeKind::Module, -1, {}, {}, {}});
    visit_def(fn, 0, true);
    resolve_all();
    return build();
  }

 private:
  enum class ScopeKind { Module, Function, Lambda, Comprehension };
  enum class Bind { Param, Assign, NestedDef, CompTarget, Import, Walrus, FunctionName };

  struct Site {
    int token;
    Bind kind;
    const FunctionDef* def = nullptr;
    int def_scope = -1;
  };
  struct ScopeInfo {
    ScopeKind kind;
    int parent;
    std::map<std::string, std::vector<Site>, std::less<>> bound;
    std::set<std::string, std::less<>> globals;
    std::set<std::string, std::less<>> nonlocals;
  };
  struct Ref {
    int token;
    int scope;
  };
  struct KwUse {
    int token;
    int scope;
    const Expr* callee;
  };
  struct Group {
    std::string name;
    int scope;  // 0 for module-level
    bool pinned = false;
    std::vector<int> tokens;
  };

  [[nodiscard]] std::string name_of(int tok) const {
    return std::string(lex_.tokens[static_cast<std::size_t>(tok)].text(src_));
  }
  [[nodiscard]] std::size_t begin_of(int tok) const {
    return lex_.tokens[static_cast<std::size_t>(tok)].begin;
  }

  int new_scope(ScopeKind kind, int parent) {
    scopes_.push_back(ScopeInfo{kind, parent, {}, {}, {}});
    return static_cast<int>(scopes_.size()) - 1;
  }

  void bind(int tok, int scope, Bind kind, const FunctionDef* def = nullptr, int def_scope = -1) {
    scopes_[static_cast<std::size_t>(scope)].bound[name_of(tok)].push_back(
        Site{tok, kind, def, def_scope});
    refs_.push_back(Ref{tok, scope});
  }
  void use(int tok, int scope) { refs_.push_back(Ref{tok, scope}); }
  void fixed(int tok, Role role) { fixed_[tok] = role; }

  // --- walk -----------------------------------------------------------------
  void visit_def(const FunctionDef& fn, int scope, bool top) {
    for (const auto& d : fn.decorators) visit(*d, scope);
    visit_param_extras(fn.params, scope);
    if (fn.returns) visit(*fn.returns, scope);
    const int inner = new_scope(ScopeKind::Function, scope);
    bind(fn.name_tok, scope, top ? Bind::FunctionName : Bind::NestedDef, &fn, inner);
    for (const auto& p : fn.params) bind(p.name_tok, inner, Bind::Param);
    visit_block(fn.body, inner);
  }

  void visit_param_extras(const std::vector<Param>& params, int scope) {
    for (const auto& p : params) {
      if (p.annotation) visit(*p.annotation, scope);
      if (p.default_value) visit(*p.default_value, scope);
    }
  }

  void visit_block(const Block& block, int scope) {
    for (const auto& s : block) visit_stmt(*s, scope);
  }

  void visit_stmt(const Stmt& s, int scope) {
    auto& info = scopes_[static_cast<std::size_t>(scope)];
    switch (s.kind) {
      case StmtKind::Assign:
        for (std::size_t i = 0; i + 1 < s.exprs.size(); ++i) bind_target(*s.exprs[i], scope);
        visit(*s.exprs.back(), scope);
        break;
      case StmtKind::AugAssign:
      case StmtKind::AnnAssign:
        bind_target(*s.exprs[0], scope);
        for (std::size_t i = 1; i < s.exprs.size(); ++i) visit(*s.exprs[i], scope);
        break;
      case StmtKind::Del:
      case StmtKind::For:
        bind_target(*s.exprs[0], scope);
        for (std::size_t i = 1; i < s.exprs.size(); ++i) visit(*s.exprs[i], scope);
        break;
      case StmtKind::Global:
      case StmtKind::Nonlocal:
        for (int tok : s.names) {
          (s.kind == StmtKind::Global ? info.globals : info.nonlocals).insert(name_of(tok));
          use(tok, scope);
        }
        break;
      case StmtKind::Import:
        for (const auto& a : s.aliases) {
          const std::size_t first_attr = a.as_tok >= 0 ? 0 : 1;
          for (std::size_t i = first_attr; i < a.path.size(); ++i) fixed(a.path[i], Role::AttributeName);
          bind(a.as_tok >= 0 ? a.as_tok : a.path[0], scope, Bind::Import);
        }
        break;
      case StmtKind::ImportFrom:
        for (int tok : s.names) fixed(tok, Role::AttributeName);
        for (const auto& a : s.aliases) {
          if (a.as_tok >= 0) {
            fixed(a.path[0], Role::AttributeName);
            bind(a.as_tok, scope, Bind::Import);
          } else {
            bind(a.path[0], scope, Bind::Import);
          }
        }
        break;
      case StmtKind::With:
        for (const auto& item : s.items) {
          visit(*item.context, scope);
          if (item.target) bind_target(*item.target, scope);
        }
        break;
      case StmtKind::Try:
        for (const auto& h : s.handlers) {
          if (h.type) visit(*h.type, scope);
          if (h.name_tok >= 0) bind(h.name_tok, scope, Bind::Assign);
          visit_block(h.body, scope);
        }
        break;
      case StmtKind::FunctionDef:
        visit_def(*s.def, scope, false);
        break;
      default:
        for (const auto& e : s.exprs) visit(*e, scope);
        break;
    }
    for (const auto& b : s.blocks) visit_block(b, scope);
  }

  void bind_target(const Expr& e, int scope, Bind kind = Bind::Assign) {
    switch (e.kind) {
      case ExprKind::Name:
        bind(e.tok, scope, kind);
        break;
      case ExprKind::Tuple:
      case ExprKind::Starred:
        for (const auto& c : e.children) bind_target(*c, scope, kind);
        break;
      default:
        visit(e, scope);
        break;
    }
  }

  [[nodiscard]] int function_scope(int scope) const {
    while (scopes_[static_cast<std::size_t>(scope)].kind == ScopeKind::Comprehension)
      scope = scopes_[static_cast<std::size_t>(scope)].parent;
    return scope;
  }

  void visit(const Expr& e, int scope) {
    switch (e.kind) {
      case ExprKind::Name:
        use(e.tok, scope);
        return;
      case ExprKind::Attribute:
        visit(*e.children[0], scope);
        fixed(e.tok, Role::AttributeName);
        return;
      case ExprKind::Call:
        visit(*e.children[0], scope);
        for (const auto& a : e.args) {
          if (a.kind == Arg::Kind::Keyword) kwuses_.push_back(KwUse{a.keyword_tok, scope, e.children[0].get()});
          visit(*a.value, scope);
        }
        return;
      case ExprKind::Lambda: {
        visit_param_extras(e.params, scope);
        const int inner = new_scope(ScopeKind::Lambda, scope);
        for (const auto& p : e.params) bind(p.name_tok, inner, Bind::Param);
        visit(*e.children[0], inner);
        return;
      }
      case ExprKind::Comprehension: {
        visit(*e.generators[0].iter, scope);
        const int inner = new_scope(ScopeKind::Comprehension, scope);
        for (std::size_t i = 0; i < e.generators.size(); ++i) {
          const auto& g = e.generators[i];
          bind_target(*g.target, inner, Bind::CompTarget);
          if (i > 0) visit(*g.iter, inner);
          for (const auto& c : g.ifs) visit(*c, inner);
        }
        for (const auto& c : e.children) visit(*c, inner);
        return;
      }
      case ExprKind::NamedExpr:
        visit(*e.children[0], scope);
        bind(e.tok, function_scope(scope), Bind::Walrus);
        return;
      default:
        for (const auto& c : e.children) visit(*c, scope);
        return;
    }
  }

  // --- resolution -----------------------------------------------------------
  int group_for(int scope, const std::string& name, bool pinned) {
    auto key = std::make_pair(scope, name);
    auto it = group_ids_.find(key);
    int id;
    if (it == group_ids_.end()) {
      id = static_cast<int>(groups_.size());
      groups_.push_back(Group{name, scope, false, {}});
      group_ids_.emplace(key, id);
    } else {
      id = it->second;
    }
    if (pinned) groups_[static_cast<std::size_t>(id)].pinned = true;
    return id;
  }

  int resolve(int scope, const std::string& name) {
    bool through_nonlocal = false;
    for (;;) {
      const auto& s = scopes_[static_cast<std::size_t>(scope)];
      if (s.kind == ScopeKind::Module || s.globals.count(name)) return group_for(0, name, false);
      if (s.nonlocals.count(name)) {
        through_nonlocal = true;
        scope = s.parent;
        continue;
      }
      if (s.bound.count(name)) return group_for(scope, name, through_nonlocal);
      scope = s.parent;
    }
  }

  void resolve_all() {
    for (const auto& r : refs_) {
      const int g = resolve(r.scope, name_of(r.token));
      groups_[static_cast<std::size_t>(g)].tokens.push_back(r.token);
      token_group_[r.token] = g;
    }
    for (const auto& k : kwuses_) resolve_keyword(k);
  }

  // Keyword arguments follow the parameter they name when the callee is a
  // def of this snippet; otherwise they name an external signature.
  void resolve_keyword(const KwUse& k) {
    fixed(k.token, Role::KeywordArgName);
    if (k.callee->kind != ExprKind::Name) return;
    const int g = resolve(k.scope, name_of(k.callee->tok));
    const Group& callee = groups_[static_cast<std::size_t>(g)];
    const std::vector<Site>* sites = nullptr;
    if (callee.scope == 0) {
      auto it = scopes_[0].bound.find(callee.name);
      if (it == scopes_[0].bound.end()) return;
      sites = &it->second;
    } else {
      sites = &scopes_[static_cast<std::size_t>(callee.scope)].bound.at(callee.name);
    }
    std::vector<const Site*> defs;
    bool other = false;
    for (const auto& s : *sites) {
      if (s.def) defs.push_back(&s);
      else other = true;
    }
    const std::string kw = name_of(k.token);
    std::vector<int> param_groups;
    for (const Site* d : defs) {
      for (const auto& p : d->def->params) {
        if (p.kind == Param::Kind::Normal && name_of(p.name_tok) == kw)
          param_groups.push_back(group_for(d->def_scope, kw, false));
      }
    }
    if (param_groups.empty()) return;
    if (defs.size() == 1 && !other && !callee.pinned) {
      groups_[static_cast<std::size_t>(param_groups[0])].tokens.push_back(k.token);
      token_group_[k.token] = param_groups[0];
      fixed_.erase(k.token);
    } else {
      for (int pg : param_groups) groups_[static_cast<std::size_t>(pg)].pinned = true;
    }
  }

  Role group_role(const Group& g, bool& renameable) const {
    renameable = false;
    if (g.scope == 0) {
      if (scopes_[0].bound.count(g.name)) return Role::FunctionName;
      return is_builtin(g.name) ? Role::KeywordOrBuiltin : Role::External;
    }
    const auto& sites = scopes_[static_cast<std::size_t>(g.scope)].bound.at(g.name);
    bool param = false, import = false;
    const Site* first = &sites[0];
    for (const auto& s : sites) {
      param |= s.kind == Bind::Param;
      import |= s.kind == Bind::Import;
      if (begin_of(s.token) < begin_of(first->token)) first = &s;
    }
    if (import || (g.pinned && !param)) return Role::External;
    renameable = !g.pinned;
    if (param) return Role::Parameter;
    switch (first->kind) {
      case Bind::NestedDef: return Role::NestedDefName;
      case Bind::CompTarget: return Role::ComprehensionTarget;
      default: return Role::Local;
    }
  }

  ScopeTable build() {
    ScopeTable table;
    std::vector<int> order(groups_.size());
    for (std::size_t i = 0; i < groups_.size(); ++i) {
      auto& t = groups_[i].tokens;
      std::sort(t.begin(), t.end(), [&](int a, int b) { return begin_of(a) < begin_of(b); });
      order[i] = static_cast<int>(i);
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return begin_of(groups_[static_cast<std::size_t>(a)].tokens[0]) <
             begin_of(groups_[static_cast<std::size_t>(b)].tokens[0]);
    });
    std::vector<int> renumber(groups_.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const Group& g = groups_[static_cast<std::size_t>(order[rank])];
      renumber[static_cast<std::size_t>(order[rank])] = static_cast<int>(rank);
      BindingGroup out;
      out.id = static_cast<int>(rank);
      out.name = g.name;
      out.role = group_role(g, out.renameable);
      out.module_level = g.scope == 0;
      out.occurrences = g.tokens;
      out.definition_token = g.tokens[0];
      if (g.scope != 0) {
        const auto& sites = scopes_[static_cast<std::size_t>(g.scope)].bound.at(g.name);
        int best = sites[0].token;
        for (const auto& s : sites)
          if (begin_of(s.token) < begin_of(best)) best = s.token;
        out.definition_token = best;
      } else if (auto it = scopes_[0].bound.find(g.name); it != scopes_[0].bound.end()) {
        out.definition_token = it->second[0].token;
      }
      table.groups.push_back(std::move(out));
    }

    for (std::size_t i = 0; i < lex_.tokens.size(); ++i) {
      const int tok = static_cast<int>(i);
      const Token& t = lex_.tokens[i];
      Occurrence occ;
      occ.token = tok;
      if (t.kind == TokenKind::String) {
        occ.role = Role::StringContent;
      } else if (t.kind != TokenKind::Name) {
        continue;
      } else if (auto g = token_group_.find(tok); g != token_group_.end()) {
        occ.group = renumber[static_cast<std::size_t>(g->second)];
        occ.role = table.groups[static_cast<std::size_t>(occ.group)].role;
      } else if (auto f = fixed_.find(tok); f != fixed_.end()) {
        occ.role = f->second;
      } else if (is_keyword(t.text(src_))) {
        occ.role = Role::KeywordOrBuiltin;
      } else {
        throw SyntaxError("unclassified identifier '" + std::string(t.text(src_)) + "'", t.line,
                          t.col);
      }
      table.occurrences.push_back(occ);
    }
    std::sort(table.occurrences.begin(), table.occurrences.end(),
              [&](const Occurrence& a, const Occurrence& b) {
                return begin_of(a.token) < begin_of(b.token);
              });
    table.reindex();
    return table;
  }

  std::string_view src_;
  const LexResult& lex_;
  std::vector<ScopeInfo> scopes_;
  std::vector<Ref> refs_;
  std::vector<KwUse> kwuses_;
  std::unordered_map<int, Role> fixed_;
  std::vector<Group> groups_;
  std::map<std::pair<int, std::string>, int> group_ids_;
  std::unordered_map<int, int> token_group_;
};

}  // namespace detail

inline ScopeTable analyze_scopes(std::string_view src, const LexResult& lex, const FunctionDef& fn) {
  return detail::ScopeAnalyzer(src, lex).run(fn);
}

}  // namespace curricode::src
