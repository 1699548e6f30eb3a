#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "curricode/curriculum.hpp"
#include "curricode/metatrain.hpp"
#include "curricode/metrics.hpp"
#include "curricode/minimodel.hpp"
#include "json.hpp"

// Glue between curricula, the mini summarizer and the trainer.
namespace curricode::pipeline {

using curriculum::CurriculumBundle;
using Levels = std::array<std::vector<mini::Sequence>, 3>;

/// Vocabulary over the training levels only: code tokens of every level
/// plus the (shared) summary tokens.
inline mini::Vocab build_vocab(const CurriculumBundle& train, std::size_t min_count = 1) {
  std::vector<std::vector<std::string>> corpora;
  for (const auto& level : train.levels)
    for (const auto& ex : level.examples) {
      auto toks = mini::code_tokens(ex.code);
      if (toks.size() > mini::kMaxSource) toks.resize(mini::kMaxSource);
      corpora.push_back(std::move(toks));
    }
  for (const auto& ex : train.levels[0].examples) corpora.push_back(mini::summary_tokens(ex.docstring));
  return mini::Vocab::build(corpora, min_count);
}

inline Levels encode_levels(const mini::Vocab& v, const CurriculumBundle& b) {
  Levels out;
  for (std::size_t l = 0; l < 3; ++l)
    for (const auto& ex : b.levels[l].examples) out[l].push_back(mini::encode(v, ex.code, ex.docstring));
  return out;
}

struct Prediction {
  std::string id;
  std::string candidate;
  std::string reference;
};

inline std::vector<Prediction> predict(const mini::MiniModel& model, const std::vector<double>& theta,
                                       const mini::Vocab& v, const corpus::Dataset& ds, std::size_t limit = 0) {
  std::vector<Prediction> out;
  const std::size_t n = limit ? std::min(limit, ds.size()) : ds.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = ds.examples[i];
    const auto ids = model.greedy_decode(theta, mini::encode_code(v, ex.code));
    out.push_back({ex.id, mini::detokenize(v, ids), ex.docstring});
  }
  return out;
}

inline double mean_bleu(const std::vector<Prediction>& preds) {
  if (preds.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : preds) s += metrics::bleu4(p.candidate, p.reference);
  return s / static_cast<double>(preds.size());
}

/// Mean sentence BLEU of greedy decodes on each level.
inline std::array<double, 3> level_bleu(const mini::MiniModel& model, const std::vector<double>& theta,
                                        const mini::Vocab& v, const CurriculumBundle& b, std::size_t limit = 0) {
  std::array<double, 3> out{};
  for (std::size_t l = 0; l < 3; ++l) out[l] = mean_bleu(predict(model, theta, v, b.levels[l], limit));
  return out;
}

struct TrainJob {
  meta::Schedule schedule = meta::Schedule::RoFT;
  meta::TrainerConfig cfg;
  std::size_t d = 32;
  std::size_t d_out = 64;
  std::size_t valid_limit = 0;     // 0: whole validation bundle
  std::filesystem::path out_dir;   // empty: nothing written
};

struct TrainOutcome {
  mini::Vocab vocab;
  mini::Layout layout;
  meta::TrainResult result;
  std::vector<double> selected;  // parameters of the selected epoch
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
}

/// Vocab, init, training, per-epoch validation and checkpoints. With an
/// output directory: vocab.json, trace.jsonl, summary.json and
/// ckpt_epoch<k>.bin are written there.
inline TrainOutcome run_training(const CurriculumBundle& train, const CurriculumBundle* valid, const TrainJob& job) {
  TrainOutcome o;
  o.vocab = build_vocab(train);
  auto init = mini::init_params(o.vocab.size(), job.d, job.d_out, job.cfg.seed);
  o.layout = init.layout;
  mini::MiniModel model(o.layout);
  const Levels levels = encode_levels(o.vocab, train);
  if (!job.out_dir.empty()) std::filesystem::create_directories(job.out_dir);

  meta::TrainHooks<mini::MiniModel> hooks;
  if (valid)
    hooks.validate = [&](int, const std::vector<double>& theta) {
      return level_bleu(model, theta, o.vocab, *valid, job.valid_limit);
    };
  if (!job.out_dir.empty())
    hooks.checkpoint = [&](int epoch, const std::vector<double>& theta) {
      mini::ParamVector p{o.layout, theta};
      nlohmann::ordered_json extra;
      extra["epoch"] = epoch;
      extra["schedule"] = meta::schedule_name(job.schedule);
      mini::save_checkpoint(job.out_dir / meta::checkpoint_name(epoch), p, o.vocab.hash(), job.cfg.seed, extra);
    };

  o.result = meta::train(model, init.values, job.schedule, levels, job.cfg, hooks);
  o.selected = o.result.epoch_params.at(static_cast<std::size_t>(o.result.selected_epoch));

  if (!job.out_dir.empty()) {
    write_text(job.out_dir / "vocab.json", o.vocab.to_json().dump() + "\n");
    write_text(job.out_dir / "trace.jsonl", o.result.trace.jsonl());
    auto summary = o.result.trace.summary();
    summary["config"] = job.cfg.to_json();
    summary["d"] = job.d;
    summary["d_out"] = job.d_out;
    summary["vocab_size"] = o.vocab.size();
    summary["selected_epoch"] = o.result.selected_epoch;
    summary["selected_checkpoint"] = meta::checkpoint_name(o.result.selected_epoch);
    write_text(job.out_dir / "summary.json", summary.dump(2) + "\n");
  }
  return o;
}

}  // namespace curricode::pipeline
