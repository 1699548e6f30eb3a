#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "curricode/error.hpp"
#include "json.hpp"

namespace curricode::metrics {

// --- BLEU ---------------------------------------------------------------------

/// Lowercased whitespace tokens with every ASCII punctuation character split
/// out as its own token.
inline std::vector<std::string> bleu_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

namespace detail {

inline std::map<std::vector<std::string_view>, int> ngram_counts(const std::vector<std::string>& toks,
                                                                 std::size_t n) {
  std::map<std::vector<std::string_view>, int> out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::vector<std::string_view> g(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                    toks.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++out[g];
  }
  return out;
}

}  // namespace detail

/// Sentence-level BLEU-4 in [0, 100]. Unigram precision is unsmoothed;
/// higher orders add one to both matches and candidate n-gram count.
inline double bleu4(std::string_view candidate, std::string_view reference) {
  const auto cand = bleu_tokens(candidate);
  const auto ref = bleu_tokens(reference);
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto c = detail::ngram_counts(cand, n);
    const auto r = detail::ngram_counts(ref, n);
    long hits = 0, total = 0;
    for (const auto& [g, cnt] : c) {
      total += cnt;
      if (auto it = r.find(g); it != r.end()) hits += std::min(cnt, it->second);
    }
    if (n > 1) {
      ++hits;
      ++total;
    }
    if (hits == 0) return 0.0;
    log_sum += std::log(static_cast<double>(hits) / static_cast<double>(total));
  }
  const double c_len = static_cast<double>(cand.size());
  const double r_len = static_cast<double>(ref.size());
  const double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

struct BleuReport {
  std::vector<std::pair<std::string, double>> per_example;
  double corpus_mean = 0.0;
};

inline BleuReport bleu_report(const std::vector<std::string>& ids,
                              const std::vector<std::string>& candidates,
                              const std::vector<std::string>& references) {
  if (ids.size() != candidates.size() || ids.size() != references.size())
    throw Error("bleu_report: ids, candidates and references differ in length");
  BleuReport r;
  double sum = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double s = bleu4(candidates[i], references[i]);
    r.per_example.emplace_back(ids[i], s);
    sum += s;
  }
  r.corpus_mean = ids.empty() ? 0.0 : sum / static_cast<double>(ids.size());
  return r;
}

// --- similarity ---------------------------------------------------------------

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t a, std::size_t b)
      : Error("vector dimensions differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class ZeroVector : public Error {
 public:
  ZeroVector() : Error("cosine similarity of a zero vector is undefined") {}
};

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw DimensionMismatch(u.size(), v.size());
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw ZeroVector();
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

struct EmbeddingPair {
  std::vector<double> candidate;
  std::vector<double> reference;
};

/// Reads {"id", "candidate": [...], "reference": [...]} lines.
inline std::unordered_map<std::string, EmbeddingPair> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::unordered_map<std::string, EmbeddingPair> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out[j.at("id").get<std::string>()] = {j.at("candidate").get<std::vector<double>>(),
                                            j.at("reference").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// --- robustness report ----------------------------------------------------------

class MissingCell : public Error {
 public:
  MissingCell(const std::string& method, std::size_t level)
      : Error("method \"" + method + "\" has no score for level " + std::to_string(level + 1)) {}
};

struct MethodCells {
  std::string method;
  std::array<std::optional<double>, 3> bleu;
  std::array<std::optional<double>, 3> similarity;
};

struct MethodRow {
  std::string method;
  std::array<double, 3> bleu{};
  std::optional<std::array<double, 3>> similarity;
  double avg_bleu = 0.0;
  std::optional<double> avg_similarity;
  double delta_bleu = 0.0;
  std::optional<double> delta_similarity;
};

struct RobustnessReport {
  std::string baseline;
  std::array<std::string, 3> level_names{"L1", "L2", "L3"};
  std::vector<MethodRow> rows;

  [[nodiscard]] const MethodRow& row(std::string_view method) const {
    for (const auto& r : rows)
      if (r.method == method) return r;
    throw Error("no row for method \"" + std::string(method) + "\"");
  }

  static std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }
  static std::string signed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f", v);
    std::string s = buf;
    return s == "-0.00" ? "+0.00" : s;
  }

  /// Aligned plain-text table, one line per method: the level cells, then
  /// AVG with the change against the baseline in parentheses.
  [[nodiscard]] std::string text() const {
    std::vector<std::vector<std::string>> cells;
    const bool sim = std::any_of(rows.begin(), rows.end(), [](const MethodRow& r) { return r.similarity.has_value(); });
    std::vector<std::string> head{"Method"};
    for (const auto& l : level_names) head.push_back(l + " BLEU");
    head.push_back("AVG BLEU");
    if (sim) {
      for (const auto& l : level_names) head.push_back(l + " SIM");
      head.push_back("AVG SIM");
    }
    cells.push_back(head);
    for (const auto& r : rows) {
      std::vector<std::string> line{r.method};
      for (double b : r.bleu) line.push_back(fixed2(b));
      line.push_back(fixed2(r.avg_bleu) + " (" + signed2(r.delta_bleu) + ")");
      if (sim) {
        if (r.similarity) {
          for (double s : *r.similarity) line.push_back(fixed2(s));
          line.push_back(fixed2(*r.avg_similarity) + (r.delta_similarity ? " (" + signed2(*r.delta_similarity) + ")" : ""));
        } else {
          for (int i = 0; i < 4; ++i) line.push_back("-");
        }
      }
      cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& line : cells)
      for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    std::string out;
    for (const auto& line : cells) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i) out += "  ";
        if (i == 0) out += line[i] + std::string(width[i] - line[i].size(), ' ');
        else out += std::string(width[i] - line[i].size(), ' ') + line[i];
      }
      while (!out.empty() && out.back() == ' ') out.pop_back();
      out += '\n';
    }
    return out;
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["baseline"] = baseline;
    j["levels"] = level_names;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json row;
      row["method"] = r.method;
      row["bleu"] = r.bleu;
      row["avg_bleu"] = r.avg_bleu;
      row["delta_bleu"] = r.delta_bleu;
      if (r.similarity) {
        row["similarity"] = *r.similarity;
        row["avg_similarity"] = *r.avg_similarity;
        if (r.delta_similarity) row["delta_similarity"] = *r.delta_similarity;
        else row["delta_similarity"] = nullptr;
      } else {
        row["similarity"] = nullptr;
      }
      j["rows"].push_back(std::move(row));
    }
    return j;
  }
};

inline RobustnessReport robustness_report(const std::vector<MethodCells>& methods,
                                          const std::string& baseline,
                                          std::array<std::string, 3> level_names = {"L1", "L2", "L3"}) {
  RobustnessReport rep;
  rep.baseline = baseline;
  rep.level_names = std::move(level_names);
  const MethodRow* base = nullptr;
  for (const auto& m : methods) {
    MethodRow r;
    r.method = m.method;
    for (std::size_t l = 0; l < 3; ++l) {
      if (!m.bleu[l]) throw MissingCell(m.method, l);
      r.bleu[l] = *m.bleu[l];
    }
    r.avg_bleu = (r.bleu[0] + r.bleu[1] + r.bleu[2]) / 3.0;
    const auto present = std::count_if(m.similarity.begin(), m.similarity.end(),
                                       [](const auto& s) { return s.has_value(); });
    if (present == 3) {
      r.similarity = std::array<double, 3>{*m.similarity[0], *m.similarity[1], *m.similarity[2]};
      r.avg_similarity = ((*r.similarity)[0] + (*r.similarity)[1] + (*r.similarity)[2]) / 3.0;
    } else if (present != 0) {
      for (std::size_t l = 0; l < 3; ++l)
        if (!m.similarity[l]) throw MissingCell(m.method + " (similarity)", l);
    }
    rep.rows.push_back(std::move(r));
  }
  for (const auto& r : rep.rows)
    if (r.method == baseline) base = &r;
  if (!base) throw Error("baseline method \"" + baseline + "\" is not in the report");
  const MethodRow b = *base;
  for (auto& r : rep.rows) {
    r.delta_bleu = r.avg_bleu - b.avg_bleu;
    if (r.avg_similarity && b.avg_similarity) r.delta_similarity = *r.avg_similarity - *b.avg_similarity;
  }
  return rep;
}

}  // namespace curricode::metrics
