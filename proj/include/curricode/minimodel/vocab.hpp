#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "curricode/detail/random.hpp"
#include "curricode/error.hpp"
#include "curricode/metrics.hpp"
#include "json.hpp"

namespace curricode::mini {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr std::size_t kMaxSource = 256;
inline constexpr std::size_t kMaxTarget = 128;

/// Code tokens: identifier/number runs, every other non-space byte alone.
inline std::vector<std::string> code_tokens(std::string_view code) {
  std::vector<std::string> out;
  std::string word;
  for (char ch : code) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '_' || c >= 0x80) {
      word.push_back(ch);
      continue;
    }
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
    if (!std::isspace(c)) out.emplace_back(1, ch);
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

/// Summary tokens share the BLEU tokenization, so decoded text re-tokenizes
/// to exactly the decoded sequence.
inline std::vector<std::string> summary_tokens(std::string_view text) { return metrics::bleu_tokens(text); }

class Vocab {
 public:
  Vocab() : tokens_{"<pad>", "<unk>", "<bos>", "<eos>"} { reindex(); }

  /// Tokens ordered by descending frequency, ties alphabetical.
  static Vocab build(const std::vector<std::vector<std::string>>& corpora, std::size_t min_count = 1) {
    std::map<std::string, std::size_t> counts;
    for (const auto& seq : corpora)
      for (const auto& t : seq) ++counts[t];
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab v;
    for (const auto& [tok, n] : items)
      if (n >= min_count && !v.index_.count(tok)) v.tokens_.push_back(tok);
    v.reindex();
    return v;
  }

  [[nodiscard]] std::size_t size() const { return tokens_.size(); }
  [[nodiscard]] int id(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? kUnk : it->second;
  }
  [[nodiscard]] const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }

  [[nodiscard]] std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens_) {
      h = curricode::detail::fnv1a64(t, h);
      h = curricode::detail::fnv1a64(std::string_view("\n", 1), h);
    }
    return h;
  }

  [[nodiscard]] nlohmann::json to_json() const { return tokens_; }
  static Vocab from_json(const nlohmann::json& j) {
    Vocab v;
    v.tokens_ = j.get<std::vector<std::string>>();
    if (v.tokens_.size() < 4 || v.tokens_[0] != "<pad>" || v.tokens_[1] != "<unk>" ||
        v.tokens_[2] != "<bos>" || v.tokens_[3] != "<eos>")
      throw Error("vocabulary does not start with the four special tokens");
    v.reindex();
    if (v.index_.size() != v.tokens_.size()) throw Error("vocabulary has duplicate tokens");
    return v;
  }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// A tokenized, truncated training pair. The target ends with EOS.
struct Sequence {
  std::vector<int> src;
  std::vector<int> tgt;
};

inline std::vector<int> encode_code(const Vocab& v, std::string_view code, std::size_t max_src = kMaxSource) {
  auto toks = code_tokens(code);
  if (toks.size() > max_src) toks.resize(max_src);
  std::vector<int> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(v.id(t));
  return out;
}

inline Sequence encode(const Vocab& v, std::string_view code, std::string_view summary,
                       std::size_t max_src = kMaxSource, std::size_t max_tgt = kMaxTarget) {
  Sequence s;
  s.src = encode_code(v, code, max_src);
  auto toks = summary_tokens(summary);
  if (max_tgt > 0 && toks.size() > max_tgt - 1) toks.resize(max_tgt - 1);
  for (const auto& t : toks) s.tgt.push_back(v.id(t));
  s.tgt.push_back(kEos);
  return s;
}

/// Joins decoded ids with spaces, leaving out special tokens.
inline std::string detokenize(const Vocab& v, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos || id == kUnk) continue;
    if (!out.empty()) out += ' ';
    out += v.token(id);
  }
  return out;
}

}  // namespace curricode::mini
