#pragma once

#include <memory>
#include <vector>

namespace curricode::src {

// A deliberately small syntax tree: just enough structure to resolve every
// identifier occurrence to its binding. Token fields are indices into the
// token vector produced by the lexer.

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;
using Block = std::vector<StmtPtr>;

enum class ExprKind {
  Name,           // tok = identifier
  Attribute,      // children[0] = value, tok = attribute name
  Call,           // children[0] = callee, args
  Subscript,      // children[0] = value, children[1..] = index parts
  Tuple,          // tuple / list / parenthesized target list
  Starred,        // children[0]
  Lambda,         // params, children[0] = body
  Comprehension,  // children = element (or key, value), generators
  NamedExpr,      // tok = target name, children[0] = value
  FString,        // children = replacement-field expressions
  Literal,        // numbers, plain strings, keyword constants, '...'
  Operation,      // any other composite expression: children in source order
  Yield,          // children = optional value
};

struct Param {
  enum class Kind { Normal, VarArgs, KwArgs };
  Kind kind = Kind::Normal;
  int name_tok = -1;
  ExprPtr annotation;
  ExprPtr default_value;
};

struct Arg {
  enum class Kind { Positional, Star, DoubleStar, Keyword };
  Kind kind = Kind::Positional;
  int keyword_tok = -1;
  ExprPtr value;
};

struct Generator {
  ExprPtr target;
  ExprPtr iter;
  std::vector<ExprPtr> ifs;
};

struct Expr {
  ExprKind kind = ExprKind::Operation;
  int tok = -1;
  std::vector<ExprPtr> children;
  std::vector<Arg> args;
  std::vector<Param> params;
  std::vector<Generator> generators;
};

struct FunctionDef {
  std::vector<ExprPtr> decorators;
  int def_tok = -1;
  int name_tok = -1;
  std::vector<Param> params;
  ExprPtr returns;
  Block body;
  bool inline_body = false;  // suite on the header line
};

struct ImportAlias {
  std::vector<int> path;  // dotted components (or the imported name)
  int as_tok = -1;
};

struct Handler {
  ExprPtr type;
  int name_tok = -1;
  Block body;
};

struct WithItem {
  ExprPtr context;
  ExprPtr target;
};

enum class StmtKind {
  Expr,
  Assign,      // exprs = targets..., value (last)
  AugAssign,   // exprs = target, value
  AnnAssign,   // exprs = target, annotation [, value]
  Pass,
  Break,
  Continue,
  Return,      // exprs = [value]
  Raise,       // exprs = [exc [, cause]]
  Global,      // names
  Nonlocal,    // names
  Del,         // exprs = targets
  Assert,      // exprs
  Import,      // aliases
  ImportFrom,  // module path in `names`, aliases
  If,          // exprs = conditions (if, elif...), blocks = bodies [+ else]
  While,       // exprs = [cond], blocks = body [, else]
  For,         // exprs = [target, iter], blocks = body [, else]
  With,        // items, blocks = body
  Try,         // blocks = body [, else] [, finally]; handlers
  FunctionDef,
};

struct Stmt {
  StmtKind kind = StmtKind::Pass;
  int first_tok = -1;  // first significant token
  int last_tok = -1;   // last token of the statement, including the NEWLINE
                       // of its final line when it ends a line
  std::vector<ExprPtr> exprs;
  std::vector<int> names;
  std::vector<ImportAlias> aliases;
  std::vector<Block> blocks;
  std::vector<Handler> handlers;
  std::vector<WithItem> items;
  bool has_else = false;
  bool has_finally = false;
  std::unique_ptr<FunctionDef> def;
};

}  // namespace curricode::src
