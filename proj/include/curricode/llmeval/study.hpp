#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "curricode/curriculum.hpp"
#include "curricode/llmeval/chat.hpp"
#include "curricode/llmeval/prompts.hpp"
#include "curricode/metrics.hpp"

namespace curricode::llm {

/// Walks the turns, asking the model at every response turn with the full
/// history so far. Returns the responses in order.
inline std::vector<std::string> converse(ChatClient& client, const std::string& model,
                                         const std::vector<Turn>& turns) {
  std::vector<Message> history;
  std::vector<std::string> responses;
  for (const auto& t : turns) {
    if (t.role == Role::Response) {
      responses.push_back(client.complete(model, history));
      history.push_back({"assistant", responses.back()});
    } else {
      history.push_back({role_name(t.role), t.text});
    }
  }
  return responses;
}

struct StudyRecord {
  std::string protocol;
  std::string level;
  std::string id;
  std::string prediction;
  std::string reference;
  bool unfenced = false;
  double bleu = 0.0;
  std::optional<double> similarity;
  std::vector<std::string> responses;

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["protocol"] = protocol;
    j["level"] = level;
    j["id"] = id;
    j["prediction"] = prediction;
    j["reference"] = reference;
    j["unfenced"] = unfenced;
    j["bleu"] = bleu;
    j["similarity"] = similarity ? nlohmann::ordered_json(*similarity) : nlohmann::ordered_json(nullptr);
    j["responses"] = responses;
    return j;
  }
};

struct StudyOptions {
  std::vector<FewShot> fewshots;  // exemplars for the few-shot protocol
  unsigned concurrency = 4;
  std::filesystem::path out_dir;  // empty: records are not written
  /// Embedding pairs keyed "<protocol>/<level>/<id>"; when given for every
  /// cell, similarity columns are filled.
  std::unordered_map<std::string, metrics::EmbeddingPair> embeddings;
};

struct StudyResult {
  metrics::RobustnessReport report;
  std::vector<StudyRecord> records;
};

/// Takes the first k examples of a pool as few-shot exemplars, optionally
/// after a seeded shuffle.
inline std::vector<FewShot> pick_fewshots(const corpus::Dataset& pool, std::size_t k,
                                          std::optional<std::uint64_t> seed = std::nullopt) {
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (seed) {
    curricode::detail::Rng rng(curricode::detail::derive_seed(*seed, "fewshot"));
    rng.shuffle(std::span<std::size_t>(order));
  }
  std::vector<FewShot> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i)
    out.push_back({pool.examples[order[i]].code, pool.examples[order[i]].docstring});
  return out;
}

inline void write_records(const std::filesystem::path& dir, const std::vector<StudyRecord>& records) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "records.jsonl", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "records.jsonl").string());
  for (const auto& r : records) out << r.to_json().dump() << '\n';
}

/// Every protocol on the first `limit` examples of each level. The report
/// has one row per protocol; the first protocol is the baseline row.
inline StudyResult run_study(const curriculum::CurriculumBundle& bundle, const std::vector<Protocol>& protocols,
                             const std::string& model, std::size_t limit, ChatClient& client,
                             const StudyOptions& opt = {}) {
  if (limit > bundle.size())
    throw Error("study limit " + std::to_string(limit) + " exceeds the " + std::to_string(bundle.size()) +
                " examples in the bundle");
  const auto names = curriculum::level_names(bundle);
  StudyResult res;
  res.report.level_names = names;
  if (limit == 0 || protocols.empty()) return res;

  struct Job {
    Protocol protocol;
    std::size_t level;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (auto p : protocols)
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t i = 0; i < limit; ++i) jobs.push_back({p, l, i});

  // Fail on bad templates before any request goes out.
  for (auto p : protocols) (void)render_prompt(prompt_template(p), "", opt.fewshots);

  std::vector<std::optional<StudyRecord>> done(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size() && !failed; j = next++) {
      const auto& job = jobs[j];
      const auto& ex = bundle.levels[job.level].examples[job.index];
      try {
        StudyRecord r;
        r.protocol = protocol_name(job.protocol);
        r.level = names[job.level];
        r.id = ex.id;
        r.reference = ex.docstring;
        r.responses = converse(client, model, render_prompt(prompt_template(job.protocol), ex.code, opt.fewshots));
        const auto extracted = extract_docstring(r.responses.back());
        r.prediction = extracted.text;
        r.unfenced = extracted.unfenced;
        r.bleu = metrics::bleu4(r.prediction, r.reference);
        if (auto it = opt.embeddings.find(r.protocol + "/" + r.level + "/" + r.id); it != opt.embeddings.end())
          r.similarity = metrics::cosine_similarity(it->second.candidate, it->second.reference);
        done[j] = std::move(r);
      } catch (...) {
        errors[j] = std::current_exception();
        failed = true;
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(opt.concurrency, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (auto& r : done)
    if (r) res.records.push_back(*r);
  if (!opt.out_dir.empty()) write_records(opt.out_dir, res.records);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<metrics::MethodCells> cells;
  for (auto p : protocols) {
    metrics::MethodCells c;
    c.method = protocol_name(p);
    for (std::size_t l = 0; l < 3; ++l) {
      double bleu = 0.0, sim = 0.0;
      std::size_t n_sim = 0;
      for (const auto& r : res.records)
        if (r.protocol == c.method && r.level == names[l]) {
          bleu += r.bleu;
          if (r.similarity) {
            sim += *r.similarity;
            ++n_sim;
          }
        }
      c.bleu[l] = bleu / static_cast<double>(limit);
      if (n_sim == limit) c.similarity[l] = sim / static_cast<double>(limit);
    }
    cells.push_back(std::move(c));
  }
  res.report = metrics::robustness_report(cells, protocol_name(protocols.front()), names);
  return res;
}

}  // namespace curricode::llm
