#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curricode/curriculum.hpp"
#include "curricode/detail/random.hpp"
#include "curricode/error.hpp"
#include "json.hpp"

namespace curricode::meta {

/// Anything with a differentiable batch loss over a flat parameter vector.
template <class O>
concept Objective = requires(const O& o, const std::vector<double>& theta, const typename O::Batch& b,
                             std::vector<double>& out) {
  typename O::Example;
  requires std::same_as<typename O::Batch, std::vector<const typename O::Example*>>;
  { o.loss(theta, b) } -> std::convertible_to<double>;
  { o.loss_grad(theta, b, out) } -> std::convertible_to<double>;
  o.hvp(theta, b, theta, out);
};

enum class Schedule { ZeroShot, FtOrigin, FtAll, CL, Clawsat, RoFT };

inline const char* schedule_name(Schedule s) {
  switch (s) {
    case Schedule::ZeroShot: return "zero-shot";
    case Schedule::FtOrigin: return "ft-origin";
    case Schedule::FtAll: return "ft-all";
    case Schedule::CL: return "cl";
    case Schedule::Clawsat: return "clawsat";
    case Schedule::RoFT: return "roft";
  }
  return "?";
}

inline Schedule parse_schedule(std::string_view s) {
  for (auto k : {Schedule::ZeroShot, Schedule::FtOrigin, Schedule::FtAll, Schedule::CL, Schedule::Clawsat,
                 Schedule::RoFT})
    if (s == schedule_name(k)) return k;
  throw Error("unknown schedule \"" + std::string(s) + "\"");
}

enum class MetaOrder { FirstOrder, Exact };

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(long step, const std::string& phase, double value)
      : Error("non-finite value at step " + std::to_string(step) + " (" + phase + "): loss " +
              std::to_string(value)) {}
};

class MissingValidation : public Error {
 public:
  using Error::Error;
};

struct TrainerConfig {
  double alpha = 5e-5;
  double beta = 5e-5;
  double gamma = 5e-5;
  std::size_t batch_size = 64;
  int epochs = 3;
  double weight_decay = 0.05;
  std::optional<long> warmup_steps;  // unset: 0 for RoFT, 1000 otherwise
  bool linear_decay = true;
  std::uint64_t seed = 0;
  MetaOrder meta_order = MetaOrder::FirstOrder;
  int patience = 0;  // 0 disables early stopping

  [[nodiscard]] long warmup_for(Schedule s) const {
    if (warmup_steps) return *warmup_steps;
    return s == Schedule::RoFT ? 0 : 1000;
  }

  /// Rates may be zero only where a reduction test needs it; negatives and
  /// non-finite values are rejected.
  void validate() const {
    for (double r : {alpha, beta, gamma, weight_decay})
      if (!std::isfinite(r) || r < 0.0) throw Error("learning rates and weight decay must be finite and >= 0");
    if (batch_size < 2 || batch_size % 2 != 0) throw curriculum::OddBatchSize(batch_size);
    if (epochs < 0) throw Error("epochs must be >= 0");
    if (warmup_steps && *warmup_steps < 0) throw Error("warmup_steps must be >= 0");
    if (patience < 0) throw Error("patience must be >= 0");
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["gamma"] = gamma;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["weight_decay"] = weight_decay;
    j["warmup_steps"] = warmup_steps ? nlohmann::ordered_json(*warmup_steps) : nlohmann::ordered_json(nullptr);
    j["linear_decay"] = linear_decay;
    j["seed"] = seed;
    j["meta_order"] = meta_order == MetaOrder::FirstOrder ? "first-order" : "exact";
    j["patience"] = patience;
    return j;
  }
};

/// Linear warmup from 0 over `warmup` steps, then linear decay to 0 at
/// `total` (or constant when decay is off).
inline double lr_multiplier(long step, long total, long warmup, bool decay) {
  if (step < warmup) return static_cast<double>(step) / static_cast<double>(warmup);
  if (!decay) return 1.0;
  const long span = std::max(1L, total - warmup);
  return std::max(0.0, static_cast<double>(total - step) / static_cast<double>(span));
}

struct StepRecord {
  long step = 0;
  int epoch = 0;
  std::string phase;                     // "L1" / "L2" / "L3", "all", or "meta"
  std::map<std::string, double> losses;  // meta: L1 before the α step, L2/L3 on the query sets
  double lr = 0.0;                       // effective α (or γ) for this step

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["epoch"] = epoch;
    j["phase"] = phase;
    j["losses"] = losses;
    j["lr"] = lr;
    return j;
  }
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  std::optional<std::array<double, 3>> validation;
  std::string checkpoint;

  [[nodiscard]] double validation_mean() const {
    if (!validation) throw MissingValidation("epoch " + std::to_string(epoch) + " has no validation metrics");
    return ((*validation)[0] + (*validation)[1] + (*validation)[2]) / 3.0;
  }
};

inline std::string checkpoint_name(int epoch) { return "ckpt_epoch" + std::to_string(epoch) + ".bin"; }

struct TrainingTrace {
  Schedule schedule = Schedule::RoFT;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  bool stopped_early = false;

  [[nodiscard]] std::string jsonl() const {
    std::string out;
    for (const auto& s : steps) out += s.to_json().dump() + "\n";
    return out;
  }

  [[nodiscard]] nlohmann::ordered_json summary() const {
    nlohmann::ordered_json j;
    j["schedule"] = schedule_name(schedule);
    j["steps"] = steps.size();
    j["stopped_early"] = stopped_early;
    j["epochs"] = nlohmann::ordered_json::array();
    for (const auto& e : epochs) {
      nlohmann::ordered_json r;
      r["epoch"] = e.epoch;
      r["mean_loss"] = e.mean_loss;
      r["validation"] = e.validation ? nlohmann::ordered_json(*e.validation) : nlohmann::ordered_json(nullptr);
      r["checkpoint"] = e.checkpoint;
      j["epochs"].push_back(std::move(r));
    }
    return j;
  }
};

/// Epoch with the highest mean validation metric; ties go to the earliest.
inline int select_checkpoint(const std::vector<EpochRecord>& epochs) {
  if (epochs.empty()) throw MissingValidation("no epochs recorded");
  const EpochRecord* best = nullptr;
  double best_mean = 0.0;
  for (const auto& e : epochs) {
    const double m = e.validation_mean();
    if (!best || m > best_mean) {
      best = &e;
      best_mean = m;
    }
  }
  return best->epoch;
}

/// CL keeps its last checkpoint; every other schedule selects by validation.
inline int select_for(Schedule s, const std::vector<EpochRecord>& epochs) {
  if (epochs.empty()) throw MissingValidation("no epochs recorded");
  if (s == Schedule::CL) return epochs.back().epoch;
  return select_checkpoint(epochs);
}

/// Seed for the support/query split of one obfuscation level at one step.
inline std::uint64_t meta_split_seed(std::uint64_t seed, long step, int level) {
  using curricode::detail::derive_seed;
  return derive_seed(derive_seed(derive_seed(seed, "meta"), static_cast<std::uint64_t>(step)),
                     static_cast<std::uint64_t>(level));
}

inline std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  using curricode::detail::derive_seed;
  return derive_seed(derive_seed(seed, "epoch"), static_cast<std::uint64_t>(epoch));
}

namespace detail {

inline void check_finite(double loss, const std::vector<double>& theta, long step, const std::string& phase) {
  if (!std::isfinite(loss)) throw NonFiniteLoss(step, phase, loss);
  for (double x : theta)
    if (!std::isfinite(x)) throw NonFiniteLoss(step, phase + " parameters", loss);
}

/// θ ← θ − lr·(g + wd·θ)
inline void sgd(std::vector<double>& theta, const std::vector<double>& g, double lr, double wd) {
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * (g[i] + wd * theta[i]);
}

}  // namespace detail

struct MetaGradient {
  std::vector<double> grad;
  std::array<double, 2> query_loss{};
};

/// Sum over the light and heavy batches of the query gradient after one
/// β step on the support half. θ is read only.
template <Objective O>
MetaGradient meta_gradient(const O& obj, const std::vector<double>& theta,
                              const typename O::Batch& light, const typename O::Batch& heavy,
                              const TrainerConfig& cfg, long step) {
  MetaGradient out;
  out.grad.assign(theta.size(), 0.0);
  std::vector<double> gs, gq, hv, local;
  const typename O::Batch* levels[2] = {&light, &heavy};
  for (int k = 0; k < 2; ++k) {
    auto sq = curriculum::support_query_split(*levels[k], meta_split_seed(cfg.seed, step, k + 1));
    obj.loss_grad(theta, sq.support, gs);
    local = theta;
    for (std::size_t i = 0; i < local.size(); ++i) local[i] -= cfg.beta * gs[i];
    const double lq = obj.loss_grad(local, sq.query, gq);
    detail::check_finite(lq, local, step, k == 0 ? "L2 query" : "L3 query");
    out.query_loss[static_cast<std::size_t>(k)] = lq;
    if (cfg.meta_order == MetaOrder::Exact) {
      // d θ^l / d θ = I − β H_support(θ)
      obj.hvp(theta, sq.support, gq, hv);
      for (std::size_t i = 0; i < gq.size(); ++i) gq[i] -= cfg.beta * hv[i];
    }
    for (std::size_t i = 0; i < gq.size(); ++i) out.grad[i] += gq[i];
  }
  return out;
}

/// One step of the meta-curriculum update on an aligned (origin, light,
/// heavy) batch triple. `lr_mult` scales α and γ.
template <Objective O>
StepRecord meta_step(const O& obj, std::vector<double>& theta, const std::array<typename O::Batch, 3>& triple,
                     const TrainerConfig& cfg, long step, double lr_mult = 1.0) {
  if (triple[1].size() != triple[0].size() || triple[2].size() != triple[0].size())
    throw Error("batch triple is not aligned");
  if (triple[0].size() < 2 || triple[0].size() % 2 != 0) throw curriculum::OddBatchSize(triple[0].size());
  StepRecord rec;
  rec.step = step;
  rec.phase = "meta";
  rec.lr = cfg.alpha * lr_mult;

  std::vector<double> g;
  const double l0 = obj.loss_grad(theta, triple[0], g);
  detail::sgd(theta, g, cfg.alpha * lr_mult, cfg.weight_decay);
  detail::check_finite(l0, theta, step, "L1");
  rec.losses["L1"] = l0;

  const auto mg = meta_gradient(obj, theta, triple[1], triple[2], cfg, step);
  rec.losses["L2"] = mg.query_loss[0];
  rec.losses["L3"] = mg.query_loss[1];
  detail::sgd(theta, mg.grad, cfg.gamma * lr_mult, cfg.weight_decay);
  detail::check_finite(mg.query_loss[0] + mg.query_loss[1], theta, step, "meta");
  return rec;
}

template <Objective O>
struct TrainHooks {
  /// Per-level validation metric (higher is better) for the given parameters.
  std::function<std::array<double, 3>(int epoch, const std::vector<double>& theta)> validate;
  /// Called once per finished epoch with the parameters at that point.
  std::function<void(int epoch, const std::vector<double>& theta)> checkpoint;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  std::vector<double> theta;                      // parameters after the last epoch
  std::vector<std::vector<double>> epoch_params;  // index 0 is the initial vector
  TrainingTrace trace;
  int selected_epoch = 0;
};

/// Runs one schedule for cfg.epochs epochs over aligned levels. Levels 2
/// and 3 may be empty for schedules that never read them.
template <Objective O>
TrainResult train(const O& obj, std::vector<double> theta, Schedule schedule,
                  const std::array<std::vector<typename O::Example>, 3>& levels, const TrainerConfig& cfg,
                  const TrainHooks<O>& hooks = {}) {
  using Batch = typename O::Batch;
  cfg.validate();
  const std::size_t n = levels[0].size();
  const bool needs_all = schedule != Schedule::ZeroShot && schedule != Schedule::FtOrigin;
  if (needs_all && (levels[1].size() != n || levels[2].size() != n))
    throw Error(std::string("schedule ") + schedule_name(schedule) + " needs three aligned levels");

  TrainResult res;
  res.trace.schedule = schedule;
  auto finish_epoch = [&](int epoch, double loss_sum, std::size_t loss_n) {
    EpochRecord e;
    e.epoch = epoch;
    e.mean_loss = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;
    e.checkpoint = checkpoint_name(epoch);
    if (hooks.validate) e.validation = hooks.validate(epoch, theta);
    if (hooks.checkpoint) hooks.checkpoint(epoch, theta);
    res.epoch_params.push_back(theta);
    res.trace.epochs.push_back(std::move(e));
  };

  finish_epoch(0, 0.0, 0);
  if (schedule == Schedule::ZeroShot || cfg.epochs == 0) {
    res.theta = theta;
    res.selected_epoch = 0;
    return res;
  }

  const std::size_t per_level = n / cfg.batch_size;
  const std::size_t per_epoch = schedule == Schedule::FtAll     ? 3 * n / cfg.batch_size
                                 : schedule == Schedule::Clawsat ? 3 * per_level
                                                                 : per_level;
  const long total = static_cast<long>(per_epoch) * cfg.epochs;
  const long warmup = cfg.warmup_for(schedule);
  long step = 0;
  double best = -INFINITY;
  int since_best = 0;

  for (int e = 1; e <= cfg.epochs; ++e) {
    const std::uint64_t es = epoch_seed(cfg.seed, e);
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    auto plain = [&](const Batch& batch, const std::string& phase) {
      const double mult = lr_multiplier(step, total, warmup, cfg.linear_decay);
      StepRecord rec;
      rec.step = step;
      rec.epoch = e;
      rec.phase = phase;
      rec.lr = cfg.alpha * mult;
      std::vector<double> g;
      const double l = obj.loss_grad(theta, batch, g);
      detail::sgd(theta, g, cfg.alpha * mult, cfg.weight_decay);
      detail::check_finite(l, theta, step, phase);
      rec.losses[phase] = l;
      loss_sum += l;
      ++loss_n;
      if (hooks.on_step) hooks.on_step(rec);
      res.trace.steps.push_back(std::move(rec));
      ++step;
    };
    auto gather = [&](std::size_t level, const std::vector<std::size_t>& pos) {
      Batch b;
      b.reserve(pos.size());
      for (std::size_t i : pos) b.push_back(&levels[level][i]);
      return b;
    };

    switch (schedule) {
      case Schedule::FtOrigin:
        for (const auto& pos : curriculum::batch_positions(n, cfg.batch_size, es)) plain(gather(0, pos), "L1");
        break;
      case Schedule::CL: {
        // Epochs are cut into three consecutive runs: L1, then L2, then L3.
        const auto level = static_cast<std::size_t>((e - 1) * 3 / cfg.epochs);
        const std::string phase = "L" + std::to_string(level + 1);
        for (const auto& pos : curriculum::batch_positions(n, cfg.batch_size, es)) plain(gather(level, pos), phase);
        break;
      }
      case Schedule::FtAll:
        for (const auto& pos : curriculum::batch_positions(3 * n, cfg.batch_size, es)) {
          Batch b;
          for (std::size_t i : pos) b.push_back(&levels[i / n][i % n]);
          plain(b, "all");
        }
        break;
      case Schedule::Clawsat: {
        std::array<std::vector<std::vector<std::size_t>>, 3> order;
        for (std::size_t l = 0; l < 3; ++l)
          order[l] = curriculum::batch_positions(n, cfg.batch_size, curricode::detail::derive_seed(es, l));
        for (std::size_t k = 0; k < per_level; ++k)
          for (std::size_t l = 0; l < 3; ++l) plain(gather(l, order[l][k]), "L" + std::to_string(l + 1));
        break;
      }
      case Schedule::RoFT:
        for (const auto& pos : curriculum::batch_positions(n, cfg.batch_size, es)) {
          const double mult = lr_multiplier(step, total, warmup, cfg.linear_decay);
          StepRecord rec = meta_step(obj, theta, {gather(0, pos), gather(1, pos), gather(2, pos)}, cfg, step, mult);
          rec.epoch = e;
          loss_sum += rec.losses["L1"];
          ++loss_n;
          if (hooks.on_step) hooks.on_step(rec);
          res.trace.steps.push_back(std::move(rec));
          ++step;
        }
        break;
      case Schedule::ZeroShot:
        break;
    }
    finish_epoch(e, loss_sum, loss_n);

    if (cfg.patience > 0 && res.trace.epochs.back().validation) {
      const double m = res.trace.epochs.back().validation_mean();
      if (m > best) {
        best = m;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        res.trace.stopped_early = true;
        break;
      }
    }
  }
  res.theta = theta;
  const bool validated = hooks.validate != nullptr;
  if (validated) {
    std::vector<EpochRecord> trained(res.trace.epochs.begin() + 1, res.trace.epochs.end());
    res.selected_epoch = select_for(schedule, trained);
  } else {
    res.selected_epoch = res.trace.epochs.back().epoch;
  }
  return res;
}

}  // namespace curricode::meta
