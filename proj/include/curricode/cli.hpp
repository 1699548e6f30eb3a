#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "curricode/corpus.hpp"
#include "curricode/curriculum.hpp"
#include "curricode/llmeval.hpp"
#include "curricode/metatrain.hpp"
#include "curricode/metrics.hpp"
#include "curricode/obfuscate.hpp"
#include "curricode/pipeline.hpp"
#include "json.hpp"

namespace curricode::cli {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Setting {
  std::string key;
  std::string def;
  std::string help;
  bool flag = false;
};

inline const std::vector<Setting>& common_settings() {
  static const std::vector<Setting> s{
      {"seed", "0", "seed for every random choice in the run"},
      {"runs-root", "runs", "parent of generated run directories when --out is not given"},
      {"json", "false", "print machine-readable JSON", true},
  };
  return s;
}

inline const std::map<std::string, std::vector<Setting>>& command_settings() {
  static const std::map<std::string, std::vector<Setting>> s{
      {"obfuscate",
       {{"in", "", "input JSONL corpus"},
        {"out", "", "output directory"},
        {"transform", "fne", "fne | irn | fne+irn | dci"},
        {"lines", "5", "dead-code lines for dci"},
        {"lenient", "false", "drop records that fail instead of aborting", true},
        {"dump-scopes", "false", "print the binding groups of every function to stderr", true}}},
      {"curriculum",
       {{"in", "", "input JSONL training split"},
        {"out", "", "bundle directory"},
        {"kind", "semantic-obfuscation", "semantic-obfuscation | semantic-interference"},
        {"name", "train", "file prefix of the level files"},
        {"light", "5", "dead-code lines of level 2 (semantic-interference)"},
        {"heavy", "10", "dead-code lines of level 3 (semantic-interference)"},
        {"threads", "0", "worker threads, 0 for all cores"},
        {"max-code-lines", "0", "skip functions longer than this, 0 keeps all"},
        {"lenient", "false", "drop records that fail instead of aborting", true}}},
      {"train",
       {{"bundle", "", "training bundle directory"},
        {"valid-bundle", "", "validation bundle directory for checkpoint selection"},
        {"out", "", "output directory"},
        {"schedule", "roft", "zero-shot | ft-origin | ft-all | cl | clawsat | roft"},
        {"alpha", "5e-05", "learning rate of the update on original code"},
        {"beta", "5e-05", "inner learning rate on the support sets"},
        {"gamma", "5e-05", "outer learning rate on the query gradients"},
        {"batch-size", "64", "examples per batch, even"},
        {"epochs", "3", "training epochs"},
        {"weight-decay", "0.05", "decay applied on global updates"},
        {"warmup-steps", "", "linear warmup steps; empty uses 0 for roft and 1000 otherwise"},
        {"linear-decay", "true", "decay the learning rate linearly to zero"},
        {"meta-order", "first-order", "first-order | exact"},
        {"patience", "0", "stop after this many epochs without validation gain, 0 never"},
        {"d", "32", "embedding width"},
        {"d-out", "64", "decoder width"},
        {"valid-limit", "0", "validation examples per level, 0 for all"}}},
      {"evaluate",
       {{"predictions", "", "JSONL with id, candidate, reference (scores an existing file)"},
        {"run", "", "training output directory (decodes a bundle with its checkpoint)"},
        {"checkpoint", "", "checkpoint file; default is the run's selected one"},
        {"bundle", "", "bundle to decode in --run mode"},
        {"embeddings", "", "JSONL with id, candidate, reference vectors for similarity"},
        {"method", "", "row label for the report; default is the run's schedule"},
        {"out", "", "output directory"}}},
      {"study",
       {{"bundle", "", "bundle to summarize"},
        {"out", "", "output directory"},
        {"protocols", "zero-shot,few-shot,chain-of-thought,critique", "comma-separated protocols"},
        {"model", "", "model name sent to the endpoint"},
        {"limit", "2000", "examples per level"},
        {"shots", "3", "few-shot exemplars"},
        {"fewshot-file", "", "JSONL pool of exemplars; default is the bundle's origin level"},
        {"fewshot-seed", "", "shuffle the exemplar pool with this seed; empty takes the first k"},
        {"concurrency", "4", "requests in flight"},
        {"api-base", "", "chat-completions base URL"},
        {"api-key", "", "bearer token"},
        {"cache-dir", ".curricode-cache", "response cache directory"}}},
      {"report",
       {{"inputs", "", "comma-separated metrics.json files"},
        {"baseline", "", "baseline method; default is the first input"},
        {"out", "", "output directory"}}},
  };
  return s;
}

inline std::string env_name(const std::string& key) {
  std::string s = "CURRICODE_";
  for (char c : key) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

/// Resolved settings of one invocation with the source of every value.
struct RunConfig {
  std::string command;
  std::map<std::string, std::string> values;
  std::map<std::string, std::string> sources;
  std::map<std::string, std::string> input_hashes;

  [[nodiscard]] const std::string& str(const std::string& k) const { return values.at(k); }

  [[nodiscard]] bool flag(const std::string& k) const {
    const auto& v = str(k);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0" || v.empty()) return false;
    throw UsageError("--" + k + ": expected true or false, got \"" + v + "\"");
  }

  [[nodiscard]] double real(const std::string& k) const {
    try {
      std::size_t pos = 0;
      double d = std::stod(str(k), &pos);
      if (pos == str(k).size()) return d;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + k + ": expected a number, got \"" + str(k) + "\"");
  }

  [[nodiscard]] long integer(const std::string& k) const {
    try {
      std::size_t pos = 0;
      long v = std::stol(str(k), &pos);
      if (pos == str(k).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + k + ": expected an integer, got \"" + str(k) + "\"");
  }

  [[nodiscard]] std::size_t count(const std::string& k) const {
    const long v = integer(k);
    if (v < 0) throw UsageError("--" + k + " must be >= 0");
    return static_cast<std::size_t>(v);
  }

  [[nodiscard]] std::uint64_t seed() const {
    try {
      std::size_t pos = 0;
      auto v = std::stoull(str("seed"), &pos);
      if (pos == str("seed").size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("--seed: expected a non-negative integer, got \"" + str("seed") + "\"");
  }

  [[nodiscard]] std::string required(const std::string& k) const {
    if (str(k).empty()) throw UsageError("--" + k + " is required");
    return str(k);
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["settings"] = values;
    j["sources"] = sources;
    j["input_hashes"] = input_hashes;
    return j;
  }
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Content hash of a file, or of every regular file under a directory in
/// name order.
inline std::string hash_path(const std::filesystem::path& p) {
  if (std::filesystem::is_directory(p)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += f.filename().string() + "\n" + llm::sha256_hex(read_file(f)) + "\n";
    return llm::sha256_hex(acc);
  }
  return llm::sha256_hex(read_file(p));
}

inline std::map<std::string, std::string> load_config_file(const std::filesystem::path& p,
                                                           const std::string& command) {
  std::ifstream in(p);
  if (!in) throw UsageError("--config: cannot read " + p.string());
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw UsageError("--config: " + std::string(e.what()));
  }
  std::map<std::string, std::string> top, section;
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    std::string value;
    for (std::size_t i = 0; i < it.inputs.size(); ++i) value += (i ? "," : "") + it.inputs[i];
    if (it.parents.empty()) top[it.name] = value;
    else if (it.parents.size() == 1 && it.parents[0] == command) section[it.name] = value;
  }
  for (auto& [k, v] : section) top[k] = v;
  return top;
}

inline std::string timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) { pipeline::write_text(p, s); }

}  // namespace detail

/// Output directory: --out when given, else <runs-root>/<timestamp>-<hash8>.
/// The resolved config is written there.
inline std::filesystem::path prepare_out_dir(RunConfig& rc) {
  std::filesystem::path dir = rc.str("out");
  if (dir.empty()) {
    std::string acc = rc.command;
    for (const auto& [k, v] : rc.input_hashes) acc += k + v;
    for (const auto& [k, v] : rc.values) acc += k + "=" + v + ";";
    dir = std::filesystem::path(rc.str("runs-root")) / (detail::timestamp() + "-" + llm::sha256_hex(acc).substr(0, 8));
  }
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "run_config.json", rc.to_json().dump(2) + "\n");
  return dir;
}

inline void add_input(RunConfig& rc, const std::string& key) {
  const auto& v = rc.str(key);
  if (v.empty()) return;
  for (std::size_t b = 0; b <= v.size();) {
    auto e = v.find(',', b);
    if (e == std::string::npos) e = v.size();
    const std::string p = v.substr(b, e - b);
    if (!p.empty()) {
      if (!std::filesystem::exists(p)) throw Error("--" + key + ": " + p + " does not exist");
      rc.input_hashes[p] = detail::hash_path(p);
    }
    b = e + 1;
  }
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!corpus::trim(cur).empty()) out.push_back(corpus::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

// --- subcommands ----------------------------------------------------------------

inline int cmd_obfuscate(RunConfig& rc, std::ostream& out, std::ostream& err) {
  add_input(rc, "in");
  const std::string transform = rc.str("transform");
  if (transform != "fne" && transform != "irn" && transform != "fne+irn" && transform != "dci")
    throw UsageError("--transform: unknown transform \"" + transform + "\"");
  const long lines = rc.integer("lines");
  corpus::LoadOptions lo;
  lo.lenient = rc.flag("lenient");
  corpus::LoadReport rep;
  const auto ds = corpus::load_jsonl(rc.required("in"), lo, &rep);
  const auto dir = prepare_out_dir(rc);

  corpus::Dataset outds;
  outds.split_tag = ds.split_tag;
  std::ofstream audit(dir / "audit.jsonl", std::ios::binary | std::ios::trunc);
  std::size_t failed = 0;
  for (const auto& ex : ds.examples) {
    try {
      auto parsed = src::parse_function(ex.code);
      if (rc.flag("dump-scopes")) {
        err << "# " << ex.id << "\n";
        for (const auto& g : parsed.scope.groups)
          err << "  " << g.name << "  " << src::role_name(g.role) << (g.renameable ? "" : "  pinned") << "  x"
              << g.occurrences.size() << "\n";
      }
      nlohmann::ordered_json a;
      a["id"] = ex.id;
      a["transform"] = transform;
      std::string code;
      if (transform == "fne") {
        code = obf::fne(parsed).model.text();
      } else if (transform == "irn") {
        auto [r, map] = obf::irn(parsed);
        code = r.model.text();
        a["rename_map"] = map.to_json();
      } else if (transform == "fne+irn") {
        auto [r, map] = obf::irn(obf::fne(parsed));
        code = r.model.text();
        a["rename_map"] = map.to_json();
      } else {
        auto [r, plan] = obf::dci(parsed, lines, curriculum::example_seed(rc.seed(), ex.id, "dci"));
        code = r.model.text();
        a["plan"] = plan.to_json();
      }
      auto o = ex;
      o.code = std::move(code);
      outds.examples.push_back(std::move(o));
      audit << a.dump() << '\n';
    } catch (const Error& e) {
      if (!rc.flag("lenient")) throw Error(ex.id + ": " + e.what());
      ++failed;
      err << "dropped " << ex.id << ": " << e.what() << "\n";
    }
  }
  const auto path = dir / std::filesystem::path(rc.str("in")).filename();
  corpus::write_jsonl(path, outds);
  out << "wrote " << outds.size() << " examples to " << path.string();
  if (failed + rep.dropped) out << " (" << failed + rep.dropped << " dropped)";
  out << "\n";
  return 0;
}

inline int cmd_curriculum(RunConfig& rc, std::ostream& out, std::ostream& err) {
  add_input(rc, "in");
  const auto kind = curriculum::parse_kind(rc.str("kind"));
  corpus::LoadOptions lo;
  lo.lenient = rc.flag("lenient");
  lo.max_code_lines = rc.count("max-code-lines");
  corpus::LoadReport rep;
  const auto ds = corpus::load_jsonl(rc.required("in"), lo, &rep);
  for (const auto& w : rep.warnings) err << w << "\n";
  std::vector<std::string> dropped;
  curriculum::BuildOptions bo;
  bo.lenient = rc.flag("lenient");
  bo.threads = static_cast<unsigned>(rc.count("threads"));
  bo.dropped = &dropped;
  const auto bundle = kind == curriculum::Kind::SemanticObfuscation
                          ? curriculum::build_semantic_obfuscation(ds, bo)
                          : curriculum::build_semantic_interference(ds, static_cast<int>(rc.integer("light")),
                                                                    static_cast<int>(rc.integer("heavy")),
                                                                    rc.seed(), bo);
  const auto dir = prepare_out_dir(rc);
  curriculum::write_bundle(dir, rc.str("name"), bundle);
  for (const auto& id : dropped) err << "dropped " << id << "\n";
  out << "wrote " << curriculum::kind_name(kind) << " bundle with " << bundle.size() << " examples to "
      << dir.string() << "\n";
  return 0;
}

inline meta::TrainerConfig trainer_config(const RunConfig& rc) {
  meta::TrainerConfig c;
  c.alpha = rc.real("alpha");
  c.beta = rc.real("beta");
  c.gamma = rc.real("gamma");
  c.batch_size = rc.count("batch-size");
  c.epochs = static_cast<int>(rc.integer("epochs"));
  c.weight_decay = rc.real("weight-decay");
  if (!rc.str("warmup-steps").empty()) c.warmup_steps = rc.integer("warmup-steps");
  c.linear_decay = rc.flag("linear-decay");
  c.seed = rc.seed();
  const auto& mo = rc.str("meta-order");
  if (mo == "first-order") c.meta_order = meta::MetaOrder::FirstOrder;
  else if (mo == "exact") c.meta_order = meta::MetaOrder::Exact;
  else throw UsageError("--meta-order: expected first-order or exact, got \"" + mo + "\"");
  c.patience = static_cast<int>(rc.integer("patience"));
  for (double r : {c.alpha, c.beta, c.gamma})
    if (!(r > 0.0)) throw UsageError("learning rates must be > 0");
  if (c.batch_size < 2 || c.batch_size % 2) throw UsageError("--batch-size must be even and at least 2");
  return c;
}

inline int cmd_train(RunConfig& rc, std::ostream& out, std::ostream&) {
  add_input(rc, "bundle");
  add_input(rc, "valid-bundle");
  pipeline::TrainJob job;
  try {
    job.schedule = meta::parse_schedule(rc.str("schedule"));
  } catch (const Error& e) {
    throw UsageError("--schedule: " + std::string(e.what()));
  }
  job.cfg = trainer_config(rc);
  job.d = rc.count("d");
  job.d_out = rc.count("d-out");
  job.valid_limit = rc.count("valid-limit");
  const auto train = curriculum::read_bundle(rc.required("bundle"));
  std::optional<curriculum::CurriculumBundle> valid;
  if (!rc.str("valid-bundle").empty()) valid = curriculum::read_bundle(rc.str("valid-bundle"));
  job.out_dir = prepare_out_dir(rc);
  const auto o = pipeline::run_training(train, valid ? &*valid : nullptr, job);
  out << meta::schedule_name(job.schedule) << ": " << o.result.trace.steps.size() << " steps, "
      << o.result.trace.epochs.size() - 1 << " epochs, selected " << meta::checkpoint_name(o.result.selected_epoch)
      << " in " << job.out_dir.string() << "\n";
  return 0;
}

inline nlohmann::ordered_json metrics_json(const std::string& method, const std::array<std::string, 3>& levels,
                                           const std::array<double, 3>& bleu,
                                           const std::optional<std::array<double, 3>>& sim) {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["levels"] = levels;
  j["bleu"] = bleu;
  j["similarity"] = sim ? nlohmann::ordered_json(*sim) : nlohmann::ordered_json(nullptr);
  j["avg_bleu"] = (bleu[0] + bleu[1] + bleu[2]) / 3.0;
  return j;
}

inline int cmd_evaluate(RunConfig& rc, std::ostream& out, std::ostream&) {
  add_input(rc, "predictions");
  add_input(rc, "run");
  add_input(rc, "bundle");
  add_input(rc, "embeddings");
  const bool from_file = !rc.str("predictions").empty();
  if (from_file == !rc.str("run").empty()) throw UsageError("give exactly one of --predictions and --run");

  std::unordered_map<std::string, metrics::EmbeddingPair> emb;
  if (!rc.str("embeddings").empty()) emb = metrics::load_embeddings(rc.str("embeddings"));

  if (from_file) {
    std::vector<std::string> ids, cands, refs;
    std::ifstream in(rc.str("predictions"));
    std::string line;
    while (std::getline(in, line)) {
      if (corpus::trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line);
      ids.push_back(j.at("id").get<std::string>());
      cands.push_back(j.at("candidate").get<std::string>());
      refs.push_back(j.at("reference").get<std::string>());
    }
    const auto rep = metrics::bleu_report(ids, cands, refs);
    nlohmann::ordered_json j;
    j["examples"] = ids.size();
    j["bleu"] = rep.corpus_mean;
    if (!emb.empty()) {
      double s = 0.0;
      for (const auto& id : ids) {
        auto it = emb.find(id);
        if (it == emb.end()) throw Error("no embeddings for \"" + id + "\"");
        s += metrics::cosine_similarity(it->second.candidate, it->second.reference);
      }
      j["similarity"] = ids.empty() ? 0.0 : s / static_cast<double>(ids.size());
    }
    const auto dir = prepare_out_dir(rc);
    detail::write_text(dir / "metrics.json", j.dump(2) + "\n");
    if (rc.flag("json")) out << j.dump(2) << "\n";
    else
      out << "BLEU " << metrics::RobustnessReport::fixed2(rep.corpus_mean) << " over " << ids.size()
          << " examples\n";
    return 0;
  }

  const std::filesystem::path run = rc.str("run");
  const auto summary = nlohmann::json::parse(detail::read_file(run / "summary.json"));
  const auto vocab = mini::Vocab::from_json(nlohmann::json::parse(detail::read_file(run / "vocab.json")));
  const std::filesystem::path ckpt =
      rc.str("checkpoint").empty() ? run / summary.at("selected_checkpoint").get<std::string>()
                                   : std::filesystem::path(rc.str("checkpoint"));
  const auto cp = mini::load_checkpoint(ckpt);
  if (cp.header.at("vocab_hash").get<std::uint64_t>() != vocab.hash())
    throw Error("checkpoint " + ckpt.string() + " was trained with a different vocabulary");
  const auto bundle = curriculum::read_bundle(rc.required("bundle"));
  const auto names = curriculum::level_names(bundle);
  const std::string method = rc.str("method").empty() ? summary.at("schedule").get<std::string>() : rc.str("method");

  const auto dir = prepare_out_dir(rc);
  mini::MiniModel model(cp.params.layout);
  std::array<double, 3> bleu{};
  std::optional<std::array<double, 3>> sim;
  if (!emb.empty()) sim = std::array<double, 3>{};
  for (std::size_t l = 0; l < 3; ++l) {
    const auto preds = pipeline::predict(model, cp.params.values, vocab, bundle.levels[l]);
    bleu[l] = pipeline::mean_bleu(preds);
    std::ofstream pf(dir / ("predictions.L" + std::to_string(l + 1) + ".jsonl"), std::ios::binary | std::ios::trunc);
    double s = 0.0;
    for (const auto& p : preds) {
      nlohmann::ordered_json r;
      r["id"] = p.id;
      r["candidate"] = p.candidate;
      r["reference"] = p.reference;
      r["bleu"] = metrics::bleu4(p.candidate, p.reference);
      pf << r.dump() << '\n';
      if (sim) {
        auto it = emb.find(names[l] + "/" + p.id);
        if (it == emb.end()) throw Error("no embeddings for \"" + names[l] + "/" + p.id + "\"");
        s += metrics::cosine_similarity(it->second.candidate, it->second.reference);
      }
    }
    if (sim) (*sim)[l] = preds.empty() ? 0.0 : s / static_cast<double>(preds.size());
  }
  const auto j = metrics_json(method, names, bleu, sim);
  detail::write_text(dir / "metrics.json", j.dump(2) + "\n");
  if (rc.flag("json")) {
    out << j.dump(2) << "\n";
  } else {
    for (std::size_t l = 0; l < 3; ++l) out << names[l] << " BLEU " << metrics::RobustnessReport::fixed2(bleu[l]) << "\n";
    out << "AVG BLEU " << metrics::RobustnessReport::fixed2(j["avg_bleu"].get<double>()) << "\n";
  }
  return 0;
}

inline int cmd_study(RunConfig& rc, std::ostream& out, std::ostream&) {
  add_input(rc, "bundle");
  add_input(rc, "fewshot-file");
  std::vector<llm::Protocol> protocols;
  for (const auto& p : split_list(rc.str("protocols"))) {
    try {
      protocols.push_back(llm::parse_protocol(p));
    } catch (const Error& e) {
      throw UsageError("--protocols: " + std::string(e.what()));
    }
  }
  const auto bundle = curriculum::read_bundle(rc.required("bundle"));
  const std::size_t limit = std::min(rc.count("limit"), bundle.size());

  llm::StudyOptions opt;
  opt.concurrency = static_cast<unsigned>(std::max<std::size_t>(1, rc.count("concurrency")));
  std::optional<std::uint64_t> fs_seed;
  if (!rc.str("fewshot-seed").empty()) fs_seed = static_cast<std::uint64_t>(rc.integer("fewshot-seed"));
  const auto pool = rc.str("fewshot-file").empty() ? bundle.levels[0] : corpus::load_jsonl(rc.str("fewshot-file"));
  opt.fewshots = llm::pick_fewshots(pool, rc.count("shots"), fs_seed);

  llm::ChatConfig cc;
  cc.api_base = rc.str("api-base");
  cc.api_key = rc.str("api-key");
  cc.cache_dir = rc.str("cache-dir");
  if (limit > 0 && cc.api_base.empty()) throw UsageError("--api-base (or CURRICODE_API_BASE) is required");
  if (limit > 0 && rc.str("model").empty()) throw UsageError("--model is required");
  // Keep the key out of run_config.json.
  if (!rc.values["api-key"].empty()) rc.values["api-key"] = "<redacted>";
  llm::ChatClient client(cc);
  opt.out_dir = prepare_out_dir(rc);
  const auto res = llm::run_study(bundle, protocols, rc.str("model"), limit, client, opt);
  detail::write_text(opt.out_dir / "report.json", res.report.to_json().dump(2) + "\n");
  if (rc.flag("json")) out << res.report.to_json().dump(2) << "\n";
  else out << res.report.text();
  return 0;
}

inline int cmd_report(RunConfig& rc, std::ostream& out, std::ostream&) {
  add_input(rc, "inputs");
  const auto inputs = split_list(rc.required("inputs"));
  std::vector<metrics::MethodCells> cells;
  std::array<std::string, 3> levels{"L1", "L2", "L3"};
  for (const auto& p : inputs) {
    const auto j = nlohmann::json::parse(detail::read_file(p));
    metrics::MethodCells c;
    c.method = j.at("method").get<std::string>();
    if (j.contains("levels")) levels = j["levels"].get<std::array<std::string, 3>>();
    for (std::size_t l = 0; l < 3; ++l) {
      if (!j.at("bleu").is_array() || j["bleu"].size() != 3) throw Error(p + ": \"bleu\" must list three levels");
      c.bleu[l] = j["bleu"][l].get<double>();
      if (j.contains("similarity") && j["similarity"].is_array()) c.similarity[l] = j["similarity"][l].get<double>();
    }
    cells.push_back(std::move(c));
  }
  const std::string baseline = rc.str("baseline").empty() ? cells.front().method : rc.str("baseline");
  const auto rep = metrics::robustness_report(cells, baseline, levels);
  const auto dir = prepare_out_dir(rc);
  detail::write_text(dir / "report.json", rep.to_json().dump(2) + "\n");
  detail::write_text(dir / "report.txt", rep.text());
  if (rc.flag("json")) out << rep.to_json().dump(2) << "\n";
  else out << rep.text();
  return 0;
}

// --- entry point ----------------------------------------------------------------

/// Parses and runs one command line. Exit codes: 0 success, 1 runtime
/// failure, 2 usage error.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"curricode: obfuscation curricula and robust fine-tuning for code summarization"};
  app.name("curricode");
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::map<std::string, CLI::Option*>> opts;
  std::map<std::string, CLI::App*> subs;

  for (const auto& [name, settings] : command_settings()) {
    static const std::map<std::string, std::string> about{
        {"obfuscate", "apply one transform to a JSONL corpus"},
        {"curriculum", "build and persist a three-level curriculum bundle"},
        {"train", "train the mini summarizer with one schedule"},
        {"evaluate", "score predictions, or decode a bundle with a trained run"},
        {"study", "run the prompt study against a chat-completions endpoint"},
        {"report", "aggregate metrics files into a robustness table"}};
    auto* sub = app.add_subcommand(name, about.at(name));
    subs[name] = sub;
    sub->add_option("--config", config_path, "TOML file; keys mirror flag names, [" + name + "] section allowed");
    auto all = common_settings();
    all.insert(all.end(), settings.begin(), settings.end());
    for (const auto& s : all) {
      const std::string shown = s.def.empty() ? "" : " (default: " + s.def + ")";
      std::string desc = s.help + shown + "; env " + env_name(s.key);
      CLI::Option* o = s.flag ? sub->add_flag("--" + s.key)->description(desc)
                              : sub->add_option("--" + s.key, raw[name][s.key], desc);
      opts[name][s.key] = o;
    }
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  try {
    RunConfig rc;
    rc.command = command;
    std::map<std::string, std::string> file;
    if (!config_path.empty()) file = detail::load_config_file(config_path, command);
    auto all = common_settings();
    const auto& own = command_settings().at(command);
    all.insert(all.end(), own.begin(), own.end());
    for (const auto& [k, v] : file) {
      const bool known = std::any_of(all.begin(), all.end(), [&](const Setting& s) { return s.key == k; });
      if (!known) throw UsageError("--config: unknown key \"" + k + "\" for " + command);
    }
    for (const auto& s : all) {
      const CLI::Option* o = opts[command][s.key];
      if (o->count() > 0) {
        rc.values[s.key] = s.flag ? "true" : raw[command][s.key];
        rc.sources[s.key] = "flag";
      } else if (const char* e = std::getenv(env_name(s.key).c_str())) {
        rc.values[s.key] = e;
        rc.sources[s.key] = "env";
      } else if (auto it = file.find(s.key); it != file.end()) {
        rc.values[s.key] = it->second;
        rc.sources[s.key] = "file";
      } else {
        rc.values[s.key] = s.def;
        rc.sources[s.key] = "default";
      }
    }
    (void)rc.seed();
    if (command == "obfuscate") return cmd_obfuscate(rc, out, err);
    if (command == "curriculum") return cmd_curriculum(rc, out, err);
    if (command == "train") return cmd_train(rc, out, err);
    if (command == "evaluate") return cmd_evaluate(rc, out, err);
    if (command == "study") return cmd_study(rc, out, err);
    if (command == "report") return cmd_report(rc, out, err);
    throw UsageError("no subcommand");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace curricode::cli
