#pragma once

#include <string>
#include <vector>

#include "curricode/detail/random.hpp"

// Random well-formed Python functions for property tests. Coverage over
// realism: nested blocks, comprehensions, lambdas, nested defs, f-strings,
// comments, odd spacing and both indent styles.
namespace curricode::testing {

class PyGen {
 public:
  explicit PyGen(std::uint64_t seed) : rng_(seed) {}

  std::string function() {
    names_ = {"a", "b"};
    unit_ = rng_.below(4) == 0 ? "\t" : rng_.below(2) ? "    " : "  ";
    std::string fn_name = pick({"compute", "helper", "run", "func_1", "var_1", "total"});
    std::string params = "a, b";
    if (rng_.below(2)) params += ", c=" + literal();
    if (rng_.below(3) == 0) params += ", *rest";
    if (rng_.below(3) == 0) params += ", **opts";
    if (rng_.below(3) == 0) names_.push_back("c");
    std::string out;
    if (rng_.below(4) == 0) out += "@staticmethod\n";
    out += "def " + fn_name + "(" + params + "):";
    if (rng_.below(3) == 0) out += "  # header";
    out += "\n";
    if (rng_.below(3) == 0) out += unit_ + "\"\"\"Docstring line.\"\"\"\n";
    const int n = 1 + static_cast<int>(rng_.below(6));
    for (int i = 0; i < n; ++i) out += statement(1, 3);
    out += unit_ + "return " + expr(2) + "\n";
    if (rng_.below(5) == 0) out.pop_back();  // no trailing newline
    return out;
  }

 private:
  std::string pick(std::initializer_list<const char*> xs) {
    auto it = xs.begin();
    std::advance(it, static_cast<long>(rng_.below(xs.size())));
    return *it;
  }

  std::string name() { return names_[rng_.below(names_.size())]; }

  std::string fresh() {
    static const char* pool[] = {"x", "y", "acc", "item", "tmp", "total", "var_2", "len_", "count"};
    std::string n = pool[rng_.below(9)];
    names_.push_back(n);
    return n;
  }

  std::string literal() {
    switch (rng_.below(6)) {
      case 0: return std::to_string(rng_.below(100));
      case 1: return "'s" + std::to_string(rng_.below(9)) + "'";
      case 2: return "None";
      case 3: return "True";
      case 4: return "1.5";
      default: return "\"txt\"";
    }
  }

  std::string expr(int depth) {
    if (depth <= 0) return rng_.below(2) ? name() : literal();
    switch (rng_.below(11)) {
      case 0: return expr(depth - 1) + " + " + expr(depth - 1);
      case 1: return "(" + expr(depth - 1) + " * " + expr(depth - 1) + ")";
      case 2: return "len(" + name() + ")";
      case 3: return "[" + expr(depth - 1) + ", " + expr(depth - 1) + "]";
      case 4: {
        const std::string v = pick({"i", "k", "q"});
        return "[" + v + " for " + v + " in " + name() + " if " + v + "]";
      }
      case 5: return "(lambda z: z + " + expr(depth - 1) + ")";
      case 6: return "f\"{" + name() + "}-{" + name() + " + 1!r}\"";
      case 7: return "{" + literal() + ": " + expr(depth - 1) + "}";
      case 8: return name() + ".attr";
      case 9: return expr(depth - 1) + " if " + name() + " else " + expr(depth - 1);
      default: return "max(" + expr(depth - 1) + ", key=" + name() + ")";
    }
  }

  std::string indent(int level) {
    std::string s;
    for (int i = 0; i < level; ++i) s += unit_;
    return s;
  }

  std::string block(int level, int depth) {
    std::string out;
    const int n = 1 + static_cast<int>(rng_.below(3));
    for (int i = 0; i < n; ++i) out += statement(level, depth - 1);
    return out;
  }

  std::string statement(int level, int depth) {
    const std::string ind = indent(level);
    const auto k = depth <= 0 ? rng_.below(4) : rng_.below(12);
    switch (k) {
      case 0: {
        const std::string rhs = expr(2);
        return ind + fresh() + " = " + rhs + "\n";
      }
      case 1: return ind + name() + " += " + expr(1) + "\n";
      case 2: return ind + "print(" + expr(1) + ", sep=" + literal() + ")\n";
      case 3: return ind + "pass  # nothing\n" + (rng_.below(2) ? "\n" : "");
      case 4: return ind + "if " + expr(1) + ":\n" + block(level + 1, depth) +
                     (rng_.below(2) ? ind + "else:\n" + block(level + 1, depth) : "");
      case 5: {
        const std::string seq = name();
        return ind + "for " + fresh() + " in " + seq + ":\n" + block(level + 1, depth);
      }
      case 6: return ind + "while " + name() + ":\n" + block(level + 1, depth) + indent(level + 1) + "break\n";
      case 7: {
        std::string inner = pick({"inner", "local_fn"});
        std::string s = ind + "def " + inner + "(p, q=" + literal() + "):\n" + indent(level + 1) + "return p + " +
                        name() + "\n";
        names_.push_back(inner);
        return s + ind + name() + " = " + inner + "(" + name() + ", q=" + literal() + ")\n";
      }
      case 8: return ind + "try:\n" + block(level + 1, depth) + ind + "except (ValueError, KeyError) as err:\n" +
                     indent(level + 1) + "raise RuntimeError(str(err))\n";
      case 9: return ind + "with open(" + name() + ") as fh:\n" + block(level + 1, depth);
      case 10: {
        const std::string lhs = fresh(), rhs = fresh();
        return ind + lhs + ", " + rhs + " = " + expr(0) + ", " + expr(0) + "\n";
      }
      default: return ind + "values = (\n" + ind + unit_ + expr(1) + ",\n" + ind + unit_ + expr(1) + ")\n";
    }
  }

  curricode::detail::Rng rng_;
  std::vector<std::string> names_;
  std::string unit_;
};

}  // namespace curricode::testing
