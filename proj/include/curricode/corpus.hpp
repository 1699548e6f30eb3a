#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "curricode/detail/random.hpp"
#include "curricode/srcmodel.hpp"
#include "json.hpp"

namespace curricode::corpus {

enum class SplitTag { Train, Valid, Test };

inline const char* split_name(SplitTag t) {
  switch (t) {
    case SplitTag::Train: return "train";
    case SplitTag::Valid: return "valid";
    case SplitTag::Test: return "test";
  }
  return "?";
}

struct CorpusExample {
  std::string id;
  std::string code;
  std::string docstring;
  std::string language = "python";
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();  // unknown fields, kept verbatim

  friend bool operator==(const CorpusExample&, const CorpusExample&) = default;
};

struct Dataset {
  std::vector<CorpusExample> examples;
  SplitTag split_tag = SplitTag::Train;

  [[nodiscard]] std::size_t size() const { return examples.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

class RecordError : public Error {
 public:
  RecordError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MissingField : public RecordError {
 public:
  MissingField(std::size_t line, std::string field)
      : RecordError(line, "missing field \"" + field + "\""), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ParseError : public RecordError {
 public:
  using RecordError::RecordError;
};

class BadRatios : public Error {
 public:
  using Error::Error;
};

struct LoadOptions {
  bool lenient = false;          // drop bad records instead of failing
  std::size_t max_code_lines = 0;  // 0 keeps everything
};

struct LoadReport {
  std::size_t dropped = 0;
  std::size_t filtered = 0;
  std::vector<std::string> warnings;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(b, e - b + 1));
}

/// Removes a string-literal first statement from a function body. Returns
/// nullopt when there is none.
inline std::optional<std::string> strip_leading_docstring(const src::FunctionModel& m) {
  const auto& body = m.ast().body;
  const auto& first = *body.front();
  if (first.kind != src::StmtKind::Expr || first.exprs[0]->kind != src::ExprKind::Literal) return {};
  const auto& tok = m.tokens()[static_cast<std::size_t>(first.exprs[0]->tok)];
  if (tok.kind != src::TokenKind::String) return {};

  const auto& nodes = m.body();
  const bool alone = nodes.front().statements == 1 && !m.inline_body();
  const std::string& text = m.text();
  if (alone && nodes.size() > 1) {
    return text.substr(0, nodes[0].begin) + text.substr(nodes[1].begin);
  }
  // Keep the body non-empty: the literal expression becomes `pass`.
  std::size_t end = tok.end;
  for (int t = first.exprs[0]->tok + 1; t < first.last_tok; ++t) {
    const auto& tk = m.tokens()[static_cast<std::size_t>(t)];
    if (tk.kind == src::TokenKind::String) end = tk.end;
    else if (tk.kind != src::TokenKind::NL && tk.kind != src::TokenKind::Comment) break;
  }
  return text.substr(0, tok.begin) + "pass" + text.substr(end);
}

namespace detail {

inline const nlohmann::ordered_json& field(const nlohmann::ordered_json& rec, std::size_t line,
                                           const char* name) {
  auto it = rec.find(name);
  if (it == rec.end() || it->is_null()) throw MissingField(line, name);
  if (!it->is_string()) throw RecordError(line, std::string("field \"") + name + "\" must be a string");
  return *it;
}

inline CorpusExample parse_record(const std::string& raw, std::size_t line, LoadReport& report) {
  nlohmann::ordered_json rec;
  try {
    rec = nlohmann::ordered_json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw RecordError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!rec.is_object()) throw RecordError(line, "record is not a JSON object");
  CorpusExample ex;
  ex.id = field(rec, line, "id").get<std::string>();
  ex.code = field(rec, line, "code").get<std::string>();
  ex.docstring = field(rec, line, "docstring").get<std::string>();
  if (auto it = rec.find("language"); it != rec.end()) {
    if (!it->is_string()) throw RecordError(line, "field \"language\" must be a string");
    ex.language = it->get<std::string>();
  }
  for (auto it = rec.begin(); it != rec.end(); ++it) {
    const auto& k = it.key();
    if (k != "id" && k != "code" && k != "docstring" && k != "language") ex.extra[k] = it.value();
  }
  if (trim(ex.id).empty()) throw RecordError(line, "empty id");
  if (trim(ex.docstring).empty()) throw RecordError(line, "empty docstring");

  try {
    auto model = src::build_model(ex.code);
    if (auto stripped = strip_leading_docstring(model)) {
      report.warnings.push_back("line " + std::to_string(line) + ": stripped docstring from " + ex.id);
      ex.code = std::move(*stripped);
      (void)src::parse_function(ex.code);
    } else {
      (void)src::analyze_scopes(model.text(), model.lexed(), model.ast());
    }
  } catch (const Error& e) {
    throw ParseError(line, "code does not parse: " + std::string(e.what()));
  }
  return ex;
}

}  // namespace detail

inline Dataset load_jsonl(const std::filesystem::path& path, const LoadOptions& options = {},
                          LoadReport* report = nullptr, SplitTag tag = SplitTag::Train) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  Dataset ds;
  ds.split_tag = tag;
  std::set<std::string> ids;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (trim(raw).empty()) continue;
    try {
      CorpusExample ex = detail::parse_record(raw, line, rep);
      if (!ids.insert(ex.id).second) throw RecordError(line, "duplicate id \"" + ex.id + "\"");
      if (options.max_code_lines > 0 &&
          static_cast<std::size_t>(std::count(ex.code.begin(), ex.code.end(), '\n')) >
              options.max_code_lines) {
        ++rep.filtered;
        continue;
      }
      ds.examples.push_back(std::move(ex));
    } catch (const RecordError& e) {
      if (!options.lenient) throw;
      ++rep.dropped;
      rep.warnings.push_back(std::string("dropped: ") + e.what());
    }
  }
  return ds;
}

inline nlohmann::ordered_json to_json(const CorpusExample& ex) {
  nlohmann::ordered_json rec;
  rec["id"] = ex.id;
  rec["code"] = ex.code;
  rec["docstring"] = ex.docstring;
  rec["language"] = ex.language;
  for (auto it = ex.extra.begin(); it != ex.extra.end(); ++it) rec[it.key()] = it.value();
  return rec;
}

inline void write_jsonl(const std::filesystem::path& path, const Dataset& ds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& ex : ds.examples) out << to_json(ex).dump() << '\n';
}

/// Disjoint, exhaustive (train, valid, test) partition. Valid and test sizes
/// are floored; the remainder goes to train. Each part keeps input order.
inline std::array<Dataset, 3> split(const Dataset& ds, std::array<double, 3> ratios,
                                    std::uint64_t seed) {
  for (double r : ratios)
    if (!(r > 0.0)) throw BadRatios("split ratios must be positive");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw BadRatios("split ratios must sum to 1");

  const std::size_t n = ds.size();
  auto floor_of = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t n_valid = floor_of(ratios[1]);
  const std::size_t n_test = floor_of(ratios[2]);
  const std::size_t n_train = n - n_valid - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  curricode::detail::Rng rng(curricode::detail::derive_seed(seed, "split"));
  rng.shuffle(std::span<std::size_t>(order));

  std::array<Dataset, 3> out;
  out[0].split_tag = SplitTag::Train;
  out[1].split_tag = SplitTag::Valid;
  out[2].split_tag = SplitTag::Test;
  std::array<std::vector<std::size_t>, 3> picks;
  for (std::size_t i = 0; i < n; ++i) picks[i < n_train ? 0 : i < n_train + n_valid ? 1 : 2].push_back(order[i]);
  for (std::size_t p = 0; p < 3; ++p) {
    std::sort(picks[p].begin(), picks[p].end());
    for (std::size_t idx : picks[p]) out[p].examples.push_back(ds.examples[idx]);
  }
  return out;
}

}  // namespace curricode::corpus
