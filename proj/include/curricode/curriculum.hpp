#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "curricode/corpus.hpp"
#include "curricode/detail/random.hpp"
#include "curricode/obfuscate.hpp"
#include "json.hpp"

namespace curricode::curriculum {

using corpus::CorpusExample;
using corpus::Dataset;

enum class Kind { SemanticObfuscation, SemanticInterference };

inline const char* kind_name(Kind k) {
  return k == Kind::SemanticObfuscation ? "semantic-obfuscation" : "semantic-interference";
}

inline Kind parse_kind(std::string_view s) {
  if (s == "semantic-obfuscation") return Kind::SemanticObfuscation;
  if (s == "semantic-interference") return Kind::SemanticInterference;
  throw Error("unknown curriculum kind \"" + std::string(s) + "\"");
}

struct CurriculumBundle {
  Kind kind = Kind::SemanticObfuscation;
  std::array<Dataset, 3> levels;                  // L1 = origin, L2, L3
  std::vector<nlohmann::ordered_json> provenance;  // one audit record per example
  nlohmann::ordered_json settings = nlohmann::ordered_json::object();

  [[nodiscard]] std::size_t size() const { return levels[0].size(); }
};

class TransformFailed : public Error {
 public:
  explicit TransformFailed(std::vector<std::pair<std::string, std::string>> failures)
      : Error(describe(failures)), failures_(std::move(failures)) {}
  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& failures() const {
    return failures_;
  }

 private:
  static std::string describe(const std::vector<std::pair<std::string, std::string>>& f) {
    std::string s = std::to_string(f.size()) + " example(s) failed to transform";
    for (std::size_t i = 0; i < f.size() && i < 5; ++i) s += "; " + f[i].first + ": " + f[i].second;
    return s;
  }
  std::vector<std::pair<std::string, std::string>> failures_;
};

class OddBatchSize : public Error {
 public:
  explicit OddBatchSize(std::size_t n)
      : Error("batch size " + std::to_string(n) + " must be even and at least 2") {}
};

class BatchTooLarge : public Error {
 public:
  BatchTooLarge(std::size_t batch, std::size_t n)
      : Error("batch size " + std::to_string(batch) + " exceeds dataset size " + std::to_string(n)) {}
};

struct BuildOptions {
  bool lenient = false;
  unsigned threads = 0;  // 0: hardware concurrency
  std::vector<std::string>* dropped = nullptr;  // receives ids dropped in lenient mode
};

/// Seed for obfuscating one split; each split gets an independent stream.
inline std::uint64_t split_seed(std::uint64_t seed, corpus::SplitTag tag) {
  return curricode::detail::derive_seed(seed, corpus::split_name(tag));
}

/// Seed for one example at one level, independent of dataset order.
inline std::uint64_t example_seed(std::uint64_t seed, std::string_view id, std::string_view level) {
  return curricode::detail::derive_seed(curricode::detail::derive_seed(seed, id), level);
}

namespace detail {

struct Transformed {
  std::string l2, l3;
  nlohmann::ordered_json audit;
  std::string error;
};

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

template <class Fn>
CurriculumBundle assemble(Kind kind, const Dataset& train, const BuildOptions& opt, Fn transform) {
  std::vector<Transformed> out(train.size());
  parallel_for(train.size(), opt.threads, [&](std::size_t i) {
    try {
      out[i] = transform(train.examples[i]);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  std::vector<std::pair<std::string, std::string>> failures;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!out[i].error.empty()) failures.emplace_back(train.examples[i].id, out[i].error);
  if (!failures.empty() && !opt.lenient) throw TransformFailed(std::move(failures));

  CurriculumBundle b;
  b.kind = kind;
  for (auto& level : b.levels) level.split_tag = train.split_tag;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const CorpusExample& ex = train.examples[i];
    if (!out[i].error.empty()) {
      if (opt.dropped) opt.dropped->push_back(ex.id);
      continue;
    }
    b.levels[0].examples.push_back(ex);
    CorpusExample e2 = ex;
    e2.code = std::move(out[i].l2);
    b.levels[1].examples.push_back(std::move(e2));
    CorpusExample e3 = ex;
    e3.code = std::move(out[i].l3);
    b.levels[2].examples.push_back(std::move(e3));
    out[i].audit["id"] = ex.id;
    b.provenance.push_back(std::move(out[i].audit));
  }
  return b;
}

}  // namespace detail

/// L2 = fne(L1), L3 = irn(fne(L1)).
inline CurriculumBundle build_semantic_obfuscation(const Dataset& train, const BuildOptions& opt = {}) {
  auto b = detail::assemble(Kind::SemanticObfuscation, train, opt, [](const CorpusExample& ex) {
    detail::Transformed t;
    const auto parsed = src::parse_function(ex.code);
    const auto l2 = obf::fne(parsed);
    auto [l3, map] = obf::irn(l2);
    t.l2 = l2.model.text();
    t.l3 = l3.model.text();
    t.audit["id"] = ex.id;
    t.audit["L2"] = {{"transform", "fne"},
                     {"original_name", std::string(parsed.model.name())},
                     {"name", std::string(l2.model.name())}};
    t.audit["L3"] = {{"transform", "irn(fne)"}, {"rename_map", map.to_json()}};
    return t;
  });
  b.settings = {{"kind", kind_name(b.kind)}};
  return b;
}

/// L2 = dci(L1, light), L3 = dci(L1, heavy), seeded per example.
inline CurriculumBundle build_semantic_interference(const Dataset& train, int light = 5,
                                                    int heavy = 10, std::uint64_t seed = 0,
                                                    const BuildOptions& opt = {}) {
  if (light < 0 || heavy < 0) throw Error("dead-code line counts must be non-negative");
  if (light >= heavy) throw Error("light dead-code count must be below the heavy count");
  auto b = detail::assemble(Kind::SemanticInterference, train, opt, [&](const CorpusExample& ex) {
    detail::Transformed t;
    const auto parsed = src::parse_function(ex.code);
    auto [l2, plan2] = obf::dci(parsed, light, example_seed(seed, ex.id, "L2"));
    auto [l3, plan3] = obf::dci(parsed, heavy, example_seed(seed, ex.id, "L3"));
    t.l2 = l2.model.text();
    t.l3 = l3.model.text();
    t.audit["id"] = ex.id;
    t.audit["L2"] = {{"transform", "dci"}, {"plan", plan2.to_json()}};
    t.audit["L3"] = {{"transform", "dci"}, {"plan", plan3.to_json()}};
    return t;
  });
  b.settings = {{"kind", kind_name(b.kind)}, {"light", light}, {"heavy", heavy}, {"seed", seed}};
  return b;
}

/// Display names of the three levels, origin first.
inline std::array<std::string, 3> level_names(const CurriculumBundle& b) {
  if (b.kind == Kind::SemanticObfuscation) return {"origin", "FNE", "IRN"};
  const auto light = b.settings.contains("light") ? b.settings["light"].get<int>() : 5;
  const auto heavy = b.settings.contains("heavy") ? b.settings["heavy"].get<int>() : 10;
  return {"origin", "DCI-" + std::to_string(light), "DCI-" + std::to_string(heavy)};
}

// --- persistence --------------------------------------------------------------

inline std::filesystem::path level_path(const std::filesystem::path& dir, const std::string& name,
                                        int level) {
  return dir / (name + ".L" + std::to_string(level) + ".jsonl");
}

inline void write_bundle(const std::filesystem::path& dir, const std::string& name,
                         const CurriculumBundle& b) {
  std::filesystem::create_directories(dir);
  for (int l = 0; l < 3; ++l) corpus::write_jsonl(level_path(dir, name, l + 1), b.levels[static_cast<std::size_t>(l)]);
  std::ofstream audit(dir / (name + ".audit.jsonl"), std::ios::binary | std::ios::trunc);
  for (const auto& rec : b.provenance) audit << rec.dump() << '\n';
  nlohmann::ordered_json meta = b.settings;
  meta["kind"] = kind_name(b.kind);
  meta["name"] = name;
  meta["examples"] = b.size();
  std::ofstream(dir / "bundle.json", std::ios::binary | std::ios::trunc) << meta.dump(2) << '\n';
}

inline CurriculumBundle read_bundle(const std::filesystem::path& dir, std::string name = {}) {
  std::ifstream meta_in(dir / "bundle.json");
  if (!meta_in) throw Error("no bundle.json in " + dir.string());
  auto meta = nlohmann::ordered_json::parse(meta_in);
  if (name.empty()) name = meta.at("name").get<std::string>();
  CurriculumBundle b;
  b.kind = parse_kind(meta.at("kind").get<std::string>());
  b.settings = meta;
  for (int l = 0; l < 3; ++l)
    b.levels[static_cast<std::size_t>(l)] = corpus::load_jsonl(level_path(dir, name, l + 1));
  for (int l = 1; l < 3; ++l) {
    const auto& a = b.levels[0].examples;
    const auto& c = b.levels[static_cast<std::size_t>(l)].examples;
    bool aligned = a.size() == c.size();
    for (std::size_t i = 0; aligned && i < a.size(); ++i)
      aligned = a[i].id == c[i].id && a[i].docstring == c[i].docstring;
    if (!aligned) throw Error("curriculum levels in " + dir.string() + " are not aligned");
  }
  std::ifstream audit(dir / (name + ".audit.jsonl"));
  std::string line;
  while (std::getline(audit, line))
    if (!corpus::trim(line).empty()) b.provenance.push_back(nlohmann::ordered_json::parse(line));
  return b;
}

// --- batching -----------------------------------------------------------------

struct BatchTriple {
  std::size_t step = 0;
  std::vector<std::size_t> indices;  // positions in each level, shared by all three
  std::array<std::vector<const CorpusExample*>, 3> batches;

  [[nodiscard]] const std::vector<const CorpusExample*>& origin() const { return batches[0]; }
  [[nodiscard]] const std::vector<const CorpusExample*>& l2() const { return batches[1]; }
  [[nodiscard]] const std::vector<const CorpusExample*>& l3() const { return batches[2]; }
};

/// Seeded shuffle of [0, n) cut into full batches; the last partial batch is
/// dropped.
inline std::vector<std::vector<std::size_t>> batch_positions(std::size_t n, std::size_t batch_size,
                                                             std::uint64_t epoch_seed) {
  if (batch_size < 2 || batch_size % 2 != 0) throw OddBatchSize(batch_size);
  if (batch_size > n) throw BatchTooLarge(batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  curricode::detail::Rng rng(curricode::detail::derive_seed(epoch_seed, "batches"));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t step = 0; step < n / batch_size; ++step)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(step * batch_size),
                     order.begin() + static_cast<std::ptrdiff_t>((step + 1) * batch_size));
  return out;
}

/// One shared shuffle of example positions per epoch. The returned pointers
/// refer into `bundle`.
inline std::vector<BatchTriple> batch_triples(const CurriculumBundle& bundle, std::size_t batch_size,
                                              std::uint64_t epoch_seed) {
  std::vector<BatchTriple> out;
  for (auto& positions : batch_positions(bundle.size(), batch_size, epoch_seed)) {
    BatchTriple t;
    t.step = out.size();
    t.indices = std::move(positions);
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t idx : t.indices) t.batches[l].push_back(&bundle.levels[l].examples[idx]);
    out.push_back(std::move(t));
  }
  return out;
}

template <class T>
struct SupportQuerySplit {
  std::vector<T> support;
  std::vector<T> query;
};

/// Seeded shuffle, then first half support, second half query.
template <class T>
SupportQuerySplit<T> support_query_split(std::vector<T> batch, std::uint64_t seed) {
  if (batch.empty() || batch.size() % 2 != 0) throw OddBatchSize(batch.size());
  curricode::detail::Rng rng(curricode::detail::derive_seed(seed, "support-query"));
  rng.shuffle(std::span<T>(batch));
  SupportQuerySplit<T> out;
  const auto half = static_cast<std::ptrdiff_t>(batch.size() / 2);
  out.support.assign(batch.begin(), batch.begin() + half);
  out.query.assign(batch.begin() + half, batch.end());
  return out;
}

}  // namespace curricode::curriculum
