#pragma once

#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "curricode/detail/random.hpp"
#include "curricode/srcmodel.hpp"
#include "json.hpp"

namespace curricode::obf {

using src::ParsedFunction;
using src::Role;

class InjectionOverflow : public Error {
 public:
  explicit InjectionOverflow(long n)
      : Error("dead-code injection of " + std::to_string(n) + " lines exceeds the limit of 1000") {}
};

inline constexpr int kMaxInjectedLines = 1000;

struct RenameEntry {
  int group = -1;
  std::string original;
  std::string replacement;
  Role role = Role::Local;
};

struct RenameMap {
  std::vector<RenameEntry> entries;

  [[nodiscard]] nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& e : entries)
      arr.push_back({{"group", e.group},
                     {"original", e.original},
                     {"replacement", e.replacement},
                     {"role", std::string(src::role_name(e.role))}});
    return arr;
  }
};

enum class DeadKind { UnusedAssignment, DeadBranch, NoOpLoop };

inline const char* dead_kind_name(DeadKind k) {
  switch (k) {
    case DeadKind::UnusedAssignment: return "unused-assignment";
    case DeadKind::DeadBranch: return "dead-branch";
    case DeadKind::NoOpLoop: return "no-op-loop";
  }
  return "?";
}

struct DciInsertion {
  std::size_t slot = 0;
  DeadKind kind = DeadKind::UnusedAssignment;
  std::vector<src::InsertedLine> lines;  // one logical statement per line
  std::vector<std::string> fresh_names;
};

struct DciPlan {
  int n_lines = 0;
  std::uint64_t seed = 0;
  std::vector<DciInsertion> insertions;

  [[nodiscard]] nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& ins : insertions) {
      std::string text;
      for (const auto& l : ins.lines) text += std::string(4 * l.extra_depth, ' ') + l.text + "\n";
      arr.push_back({{"slot", ins.slot},
                     {"kind", dead_kind_name(ins.kind)},
                     {"text", text},
                     {"fresh_names", ins.fresh_names}});
    }
    return {{"n_lines", n_lines}, {"seed", seed}, {"insertions", arr}};
  }
};

namespace detail {

inline std::set<std::string, std::less<>> identifier_names(const src::FunctionModel& m) {
  std::set<std::string, std::less<>> out;
  for (const auto& t : m.tokens())
    if (t.kind == src::TokenKind::Name) out.emplace(t.text(m.text()));
  return out;
}

}  // namespace detail

/// Function Name Erosion: the defined name and its recursive references
/// become `func_1` (`func_k` for the first k that is free if `func_1` is
/// already used for something else).
inline ParsedFunction fne(const ParsedFunction& in) {
  const auto& scope = in.scope;
  const src::Occurrence* def = scope.find(in.model.name_token());
  const auto& group = scope.groups[static_cast<std::size_t>(def->group)];

  std::set<std::string, std::less<>> taken;
  for (const auto& occ : scope.occurrences) {
    if (occ.group == def->group) continue;
    const auto& t = in.model.tokens()[static_cast<std::size_t>(occ.token)];
    if (t.kind == src::TokenKind::Name) taken.emplace(t.text(in.model.text()));
  }
  std::string name;
  for (int k = 1;; ++k) {
    name = "func_" + std::to_string(k);
    if (!taken.count(name)) break;
  }
  if (name == in.model.name()) return in;

  src::FunctionModel edited = in.model;
  for (int tok : group.occurrences) edited.replace_token(tok, name);
  return src::parse_function(edited.render());
}

/// Identifier Renaming: every renameable binding group becomes `var_k`,
/// numbered by first occurrence.
inline std::pair<ParsedFunction, RenameMap> irn(const ParsedFunction& in) {
  const auto& scope = in.scope;
  std::set<std::string, std::less<>> kept;
  for (const auto& occ : scope.occurrences) {
    if (occ.group >= 0 && scope.groups[static_cast<std::size_t>(occ.group)].renameable) continue;
    const auto& t = in.model.tokens()[static_cast<std::size_t>(occ.token)];
    if (t.kind == src::TokenKind::Name) kept.emplace(t.text(in.model.text()));
  }

  RenameMap map;
  src::FunctionModel edited = in.model;
  int k = 0;
  for (const auto& g : scope.groups) {
    if (!g.renameable) continue;
    std::string name;
    do {
      name = "var_" + std::to_string(++k);
    } while (kept.count(name));
    map.entries.push_back(RenameEntry{g.id, g.name, name, g.role});
    if (name == g.name) continue;
    for (int tok : g.occurrences) edited.replace_token(tok, name);
  }
  if (!edited.edited()) return {in, std::move(map)};
  return {src::parse_function(edited.render()), std::move(map)};
}

/// Dead Code Injection: `n_lines` logical statements that cannot affect the
/// function's behavior, placed at seeded slots of the top-level body.
inline std::pair<ParsedFunction, DciPlan> dci(const ParsedFunction& in, long n_lines,
                                              std::uint64_t seed) {
  if (n_lines > kMaxInjectedLines) throw InjectionOverflow(n_lines);
  if (n_lines < 0) throw Error("dead-code line count must be non-negative");
  DciPlan plan;
  plan.n_lines = static_cast<int>(n_lines);
  plan.seed = seed;
  if (n_lines == 0) return {in, std::move(plan)};

  const auto names = detail::identifier_names(in.model);
  curricode::detail::Rng rng(seed);
  int counter = 0;
  auto fresh = [&] {
    for (;;) {
      ++counter;
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "%06llx",
                    static_cast<unsigned long long>(
                        curricode::detail::derive_seed(seed, static_cast<std::uint64_t>(counter)) &
                        0xFFFFFFu));
      std::string name = "_dci" + std::to_string(counter) + "_" + suffix;
      if (!names.count(name)) return name;
    }
  };
  auto literal = [&] { return std::to_string(rng.below(100)); };
  static constexpr const char* kOps[] = {"+", "-", "*"};
  auto arithmetic = [&] {
    const auto lhs = literal();
    const char* op = kOps[rng.below(3)];
    return lhs + " " + op + " " + literal();
  };
  auto false_guard = [&] {
    const auto a = rng.below(100);
    auto b = rng.below(99);
    if (b >= a) ++b;
    switch (rng.below(3)) {
      case 0: return std::to_string(a) + " == " + std::to_string(b);
      case 1: return std::to_string(std::max(a, b)) + " < " + std::to_string(std::min(a, b));
      default: return std::to_string(a) + " == " + std::to_string(a) + " + 1";
    }
  };

  const std::size_t slots = in.model.slot_count();
  long remaining = n_lines;
  while (remaining > 0) {
    DciInsertion ins;
    ins.slot = static_cast<std::size_t>(rng.below(slots));
    const auto pick = remaining == 1 ? 0 : rng.below(3);
    if (pick == 0) {
      ins.kind = DeadKind::UnusedAssignment;
      auto v = fresh();
      ins.lines.push_back({0, v + " = " + arithmetic()});
      ins.fresh_names.push_back(v);
    } else if (pick == 1) {
      ins.kind = DeadKind::DeadBranch;
      auto v = fresh();
      ins.lines.push_back({0, "if " + false_guard() + ":"});
      ins.lines.push_back({1, v + " = " + arithmetic()});
      ins.fresh_names.push_back(v);
    } else {
      ins.kind = DeadKind::NoOpLoop;
      auto it = fresh();
      auto v = fresh();
      ins.lines.push_back({0, "for " + it + " in " + (rng.below(2) ? "()" : "[]") + ":"});
      const char* op = kOps[rng.below(3)];
      ins.lines.push_back({1, v + " = " + it + " " + op + " " + literal()});
      ins.fresh_names.push_back(it);
      ins.fresh_names.push_back(v);
    }
    remaining -= static_cast<long>(ins.lines.size());
    plan.insertions.push_back(std::move(ins));
  }

  src::FunctionModel edited = in.model;
  for (const auto& ins : plan.insertions) edited.insert_lines(ins.slot, ins.lines);
  return {src::parse_function(edited.render()), std::move(plan)};
}

}  // namespace curricode::obf
