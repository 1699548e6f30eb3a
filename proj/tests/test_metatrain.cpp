#include <gtest/gtest.h>

#include <cstring>
#include <map>
#include <numeric>

#include "curricode/metatrain.hpp"
#include "curricode/minimodel.hpp"
#include "curricode/pipeline.hpp"
#include "support/model_draws.hpp"
#include "support/synthetic_corpus.hpp"

using namespace curricode;
using namespace curricode::meta;

namespace {

// Two-parameter least squares; loss (1/|B|) sum 0.5 (a.theta - b)^2.
struct Quad {
  struct Example {
    std::array<double, 2> a;
    double b;
  };
  using Batch = std::vector<const Example*>;

  double loss(const std::vector<double>& t, const Batch& batch) const {
    double s = 0;
    for (const auto* e : batch) {
      const double r = e->a[0] * t[0] + e->a[1] * t[1] - e->b;
      s += 0.5 * r * r;
    }
    return s / static_cast<double>(batch.size());
  }
  double loss_grad(const std::vector<double>& t, const Batch& batch, std::vector<double>& g) const {
    g.assign(2, 0.0);
    for (const auto* e : batch) {
      const double r = e->a[0] * t[0] + e->a[1] * t[1] - e->b;
      g[0] += r * e->a[0];
      g[1] += r * e->a[1];
    }
    g[0] /= static_cast<double>(batch.size());
    g[1] /= static_cast<double>(batch.size());
    return loss(t, batch);
  }
  void hvp(const std::vector<double>&, const Batch& batch, const std::vector<double>& v, std::vector<double>& out) const {
    out.assign(2, 0.0);
    for (const auto* e : batch) {
      const double s = e->a[0] * v[0] + e->a[1] * v[1];
      out[0] += s * e->a[0];
      out[1] += s * e->a[1];
    }
    out[0] /= static_cast<double>(batch.size());
    out[1] /= static_cast<double>(batch.size());
  }
};
static_assert(Objective<Quad>);
static_assert(Objective<mini::MiniModel>);

const Quad::Example kOrigin[2] = {{{1, 2}, 3}, {{-1, 0.5}, 1}};
const Quad::Example kLight[2] = {{{2, -1}, 0.5}, {{0.5, 1.5}, -2}};
const Quad::Example kHeavy[2] = {{{0, 1}, 4}, {{3, 1}, -0.5}};

// Exact rational results of one step from theta = (1/2, -1/3) with
// alpha = 1/10, beta = 1/20, gamma = 1/5, keyed by which example of the
// light and heavy batches is the support set (tests/oracles/meta_step_oracle.py).
const std::map<std::string, std::array<double, 2>> kOracle = {
    {"first s0-s0", {-18053.0 / 16000, -18671.0 / 16000}}, {"first s0-s1", {1091.0 / 3200, 449.0 / 3200}},
    {"first s1-s0", {-467.0 / 400, -21.0 / 64}},           {"first s1-s1", {1207.0 / 4000, 7833.0 / 8000}},
    {"exact s0-s0", {-7371.0 / 6400, -361839.0 / 320000}}, {"exact s0-s1", {6237.0 / 32000, 7113.0 / 64000}},
    {"exact s1-s0", {-748293.0 / 640000, -197607.0 / 640000}},
    {"exact s1-s1", {113547.0 / 640000, 597201.0 / 640000}}};

Quad::Batch pair(const Quad::Example* xs) { return {&xs[0], &xs[1]}; }

std::uint64_t bits_hash(const std::vector<double>& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : v) h = curricode::detail::fnv1a64(
                         std::string_view(reinterpret_cast<const char*>(&x), sizeof x), h);
  return h;
}

std::vector<mini::Sequence> random_sequences(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  curricode::detail::Rng rng(seed);
  std::vector<mini::Sequence> out(n);
  for (auto& s : out) {
    const auto ns = 1 + rng.below(8), nt = rng.below(4);
    for (std::size_t k = 0; k < ns; ++k) s.src.push_back(4 + static_cast<int>(rng.below(vocab - 4)));
    for (std::size_t k = 0; k < nt; ++k) s.tgt.push_back(4 + static_cast<int>(rng.below(vocab - 4)));
    s.tgt.push_back(mini::kEos);
  }
  return out;
}

TrainerConfig quick_cfg() {
  TrainerConfig c;
  c.alpha = c.beta = c.gamma = 0.1;
  c.batch_size = 4;
  c.epochs = 3;
  c.weight_decay = 0.0;
  c.warmup_steps = 0;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(MetaStep, MatchesRationalOracle) {
  const Quad q;
  std::set<std::string> covered;
  for (MetaOrder order : {MetaOrder::FirstOrder, MetaOrder::Exact})
    for (std::uint64_t seed = 0; seed < 24; ++seed) {
      TrainerConfig cfg;
      cfg.alpha = 0.1;
      cfg.beta = 0.05;
      cfg.gamma = 0.2;
      cfg.weight_decay = 0.0;
      cfg.meta_order = order;
      cfg.seed = seed;
      const long step = static_cast<long>(seed % 5);
      const auto light = pair(kLight), heavy = pair(kHeavy);
      const auto sl = curriculum::support_query_split(light, meta_split_seed(seed, step, 1)).support[0] - kLight;
      const auto sh = curriculum::support_query_split(heavy, meta_split_seed(seed, step, 2)).support[0] - kHeavy;
      const std::string key = std::string(order == MetaOrder::Exact ? "exact" : "first") + " s" + std::to_string(sl) +
                              "-s" + std::to_string(sh);
      covered.insert(key);
      std::vector<double> theta{0.5, -1.0 / 3};
      meta_step(q, theta, {pair(kOrigin), light, heavy}, cfg, step);
      const auto& want = kOracle.at(key);
      EXPECT_NEAR(theta[0], want[0], 1e-12) << key;
      EXPECT_NEAR(theta[1], want[1], 1e-12) << key;
    }
  EXPECT_GE(covered.size(), 6u);
}

TEST(MetaStep, RecordsLosses) {
  const Quad q;
  TrainerConfig cfg = quick_cfg();
  std::vector<double> theta{0.5, -1.0 / 3};
  const double l0 = q.loss(theta, pair(kOrigin));
  const auto rec = meta_step(q, theta, {pair(kOrigin), pair(kLight), pair(kHeavy)}, cfg, 3, 0.5);
  EXPECT_EQ(rec.phase, "meta");
  EXPECT_DOUBLE_EQ(rec.losses.at("L1"), l0);
  EXPECT_TRUE(rec.losses.count("L2") && rec.losses.count("L3"));
  EXPECT_DOUBLE_EQ(rec.lr, 0.05);
}

TEST(MetaStep, RejectsMisalignedOrOddBatches) {
  const Quad q;
  std::vector<double> theta{0, 0};
  Quad::Batch one{&kOrigin[0]};
  EXPECT_THROW(meta_step(q, theta, {pair(kOrigin), one, pair(kHeavy)}, quick_cfg(), 0), Error);
  EXPECT_THROW(meta_step(q, theta, {one, one, one}, quick_cfg(), 0), curriculum::OddBatchSize);
}

TEST(MetaGradient, LeavesThetaUntouched) {
  const auto m = curricode::testing::model_draw(5, 20, 4, 6, 4);
  const auto m2 = curricode::testing::model_draw(6, 20, 4, 6, 4);
  const mini::MiniModel model(m.layout);
  TrainerConfig cfg = quick_cfg();
  cfg.meta_order = MetaOrder::Exact;
  const auto before = bits_hash(m.theta);
  (void)meta_gradient(model, m.theta, m.batch, m2.batch, cfg, 0);
  EXPECT_EQ(bits_hash(m.theta), before);
}

TEST(MetaGradient, ExactMatchesFiniteDifferenceOfAdaptedLoss) {
  const auto m = curricode::testing::model_draw(21, 16, 3, 5, 4);
  const auto m2 = curricode::testing::model_draw(22, 16, 3, 5, 4);
  const mini::MiniModel model(m.layout);
  TrainerConfig cfg = quick_cfg();
  cfg.beta = 0.3;
  cfg.meta_order = MetaOrder::Exact;
  const long step = 2;
  const auto mg = meta_gradient(model, m.theta, m.batch, m2.batch, cfg, step);
  auto adapted = [&](const std::vector<double>& th) {
    double total = 0.0;
    const mini::Batch* levels[2] = {&m.batch, &m2.batch};
    for (int k = 0; k < 2; ++k) {
      auto sq = curriculum::support_query_split(*levels[k], meta_split_seed(cfg.seed, step, k + 1));
      std::vector<double> g;
      model.loss_grad(th, sq.support, g);
      std::vector<double> local = th;
      for (std::size_t i = 0; i < local.size(); ++i) local[i] -= cfg.beta * g[i];
      total += model.loss(local, sq.query);
    }
    return total;
  };
  curricode::detail::Rng rng(3);
  std::vector<double> th = m.theta;
  for (int k = 0; k < 40; ++k) {
    const auto i = static_cast<std::size_t>(rng.below(th.size()));
    const double keep = th[i], eps = 1e-5;
    th[i] = keep + eps;
    const double up = adapted(th);
    th[i] = keep - eps;
    const double down = adapted(th);
    th[i] = keep;
    const double num = (up - down) / (2 * eps);
    EXPECT_LT(std::abs(num - mg.grad[i]) / std::max({std::abs(num), std::abs(mg.grad[i]), 1e-10}), 1e-4) << i;
  }
}

TEST(Reduction, BetaZeroIsPooledQueryStep) {
  for (std::uint64_t draw = 1; draw <= 4; ++draw) {
    const auto o = curricode::testing::model_draw(30 + draw, 20, 4, 6, 6);
    const auto l = curricode::testing::model_draw(40 + draw, 20, 4, 6, 6);
    const auto h = curricode::testing::model_draw(50 + draw, 20, 4, 6, 6);
    const mini::MiniModel model(o.layout);
    TrainerConfig cfg = quick_cfg();
    cfg.beta = 0.0;
    cfg.alpha = 0.2;
    cfg.gamma = 0.3;
    cfg.seed = draw;
    const long step = static_cast<long>(draw);

    std::vector<double> theta = o.theta;
    meta_step(model, theta, {o.batch, l.batch, h.batch}, cfg, step);

    std::vector<double> explicit_theta = o.theta, g;
    model.loss_grad(explicit_theta, o.batch, g);
    for (std::size_t i = 0; i < g.size(); ++i) explicit_theta[i] -= cfg.alpha * g[i];
    const auto ql = curriculum::support_query_split(l.batch, meta_split_seed(cfg.seed, step, 1)).query;
    const auto qh = curriculum::support_query_split(h.batch, meta_split_seed(cfg.seed, step, 2)).query;
    std::vector<double> gl, gh;
    model.loss_grad(explicit_theta, ql, gl);
    model.loss_grad(explicit_theta, qh, gh);
    for (std::size_t i = 0; i < g.size(); ++i) explicit_theta[i] -= cfg.gamma * (gl[i] + gh[i]);

    for (std::size_t i = 0; i < theta.size(); ++i) ASSERT_NEAR(theta[i], explicit_theta[i], 1e-12) << i;
  }
}

TEST(Reduction, GammaZeroMatchesFtOriginBitForBit) {
  const std::size_t vocab = 30;
  const auto seqs = random_sequences(128, vocab, 4);
  const std::array<std::vector<mini::Sequence>, 3> levels{seqs, random_sequences(128, vocab, 5),
                                                          random_sequences(128, vocab, 6)};
  const auto init = mini::init_params(vocab, 8, 12, 9);
  const mini::MiniModel model(init.layout);
  TrainerConfig cfg;
  cfg.alpha = 0.05;
  cfg.beta = 0.05;
  cfg.gamma = 0.0;
  cfg.batch_size = 16;
  cfg.epochs = 3;
  cfg.warmup_steps = 4;
  cfg.seed = 17;
  const auto ft = train(model, init.values, Schedule::FtOrigin, levels, cfg);
  const auto roft = train(model, init.values, Schedule::RoFT, levels, cfg);
  ASSERT_EQ(ft.trace.steps.size(), roft.trace.steps.size());
  ASSERT_EQ(ft.epoch_params.size(), 4u);
  for (std::size_t e = 0; e < ft.epoch_params.size(); ++e)
    EXPECT_EQ(std::memcmp(ft.epoch_params[e].data(), roft.epoch_params[e].data(),
                          ft.epoch_params[e].size() * sizeof(double)),
              0)
        << "epoch " << e;
  EXPECT_NE(ft.theta, init.values);
}

TEST(Schedules, StepCounts) {
  const auto seqs = random_sequences(50, 20, 1);
  const std::array<std::vector<mini::Sequence>, 3> levels{seqs, seqs, seqs};
  const auto init = mini::init_params(20, 4, 6, 1);
  const mini::MiniModel model(init.layout);
  TrainerConfig cfg = quick_cfg();
  cfg.batch_size = 8;
  cfg.epochs = 2;
  EXPECT_EQ(train(model, init.values, Schedule::RoFT, levels, cfg).trace.steps.size(), 6u * 2);
  EXPECT_EQ(train(model, init.values, Schedule::FtOrigin, levels, cfg).trace.steps.size(), 6u * 2);
  EXPECT_EQ(train(model, init.values, Schedule::FtAll, levels, cfg).trace.steps.size(), 18u * 2);
  EXPECT_EQ(train(model, init.values, Schedule::Clawsat, levels, cfg).trace.steps.size(), 18u * 2);
  EXPECT_EQ(train(model, init.values, Schedule::CL, levels, cfg).trace.steps.size(), 6u * 2);
  const auto zs = train(model, init.values, Schedule::ZeroShot, levels, cfg);
  EXPECT_TRUE(zs.trace.steps.empty());
  EXPECT_EQ(zs.theta, init.values);
  EXPECT_EQ(zs.trace.epochs.size(), 1u);
}

TEST(Schedules, CurriculumPhasesAndClawsatInterleaving) {
  const auto seqs = random_sequences(16, 20, 1);
  const std::array<std::vector<mini::Sequence>, 3> levels{seqs, seqs, seqs};
  const auto init = mini::init_params(20, 4, 6, 1);
  const mini::MiniModel model(init.layout);
  TrainerConfig cfg = quick_cfg();
  cfg.batch_size = 8;
  auto phases = [&](Schedule s, int epochs) {
    cfg.epochs = epochs;
    std::string out;
    for (const auto& st : train(model, init.values, s, levels, cfg).trace.steps) out += st.phase + ",";
    return out;
  };
  EXPECT_EQ(phases(Schedule::CL, 3), "L1,L1,L2,L2,L3,L3,");
  EXPECT_EQ(phases(Schedule::CL, 6), "L1,L1,L1,L1,L2,L2,L2,L2,L3,L3,L3,L3,");
  EXPECT_EQ(phases(Schedule::CL, 4), "L1,L1,L1,L1,L2,L2,L3,L3,");
  EXPECT_EQ(phases(Schedule::Clawsat, 1), "L1,L2,L3,L1,L2,L3,");
  EXPECT_EQ(phases(Schedule::RoFT, 1), "meta,meta,");
}

TEST(Schedules, LevelsMustBeAligned) {
  const auto seqs = random_sequences(16, 20, 1);
  const std::array<std::vector<mini::Sequence>, 3> levels{seqs, {}, {}};
  const auto init = mini::init_params(20, 4, 6, 1);
  const mini::MiniModel model(init.layout);
  EXPECT_NO_THROW(train(model, init.values, Schedule::FtOrigin, levels, quick_cfg()));
  EXPECT_THROW(train(model, init.values, Schedule::RoFT, levels, quick_cfg()), Error);
}

TEST(Schedules, NamesRoundTrip) {
  for (Schedule s : {Schedule::ZeroShot, Schedule::FtOrigin, Schedule::FtAll, Schedule::CL, Schedule::Clawsat,
                     Schedule::RoFT})
    EXPECT_EQ(parse_schedule(schedule_name(s)), s);
  EXPECT_THROW(parse_schedule("maml"), Error);
}

TEST(Training, DeterministicTrace) {
  const auto seqs = random_sequences(40, 20, 2);
  const std::array<std::vector<mini::Sequence>, 3> levels{seqs, random_sequences(40, 20, 3),
                                                          random_sequences(40, 20, 4)};
  const auto init = mini::init_params(20, 4, 6, 1);
  const mini::MiniModel model(init.layout);
  const auto a = train(model, init.values, Schedule::RoFT, levels, quick_cfg());
  const auto b = train(model, init.values, Schedule::RoFT, levels, quick_cfg());
  EXPECT_EQ(a.trace.jsonl(), b.trace.jsonl());
  EXPECT_EQ(a.theta, b.theta);
}

TEST(Training, HooksAndSelection) {
  const auto seqs = random_sequences(16, 20, 2);
  const std::array<std::vector<mini::Sequence>, 3> levels{seqs, seqs, seqs};
  const auto init = mini::init_params(20, 4, 6, 1);
  const mini::MiniModel model(init.layout);
  TrainerConfig cfg = quick_cfg();
  cfg.epochs = 4;
  const std::map<int, std::array<double, 3>> scores{
      {0, {99, 99, 99}}, {1, {1, 2, 3}}, {2, {3, 3, 3}}, {3, {2, 4, 3}}, {4, {0, 0, 0}}};
  std::vector<int> saved;
  TrainHooks<mini::MiniModel> hooks;
  hooks.validate = [&](int e, const std::vector<double>&) { return scores.at(e); };
  hooks.checkpoint = [&](int e, const std::vector<double>&) { saved.push_back(e); };
  int steps = 0;
  hooks.on_step = [&](const StepRecord&) { ++steps; };
  const auto r = train(model, init.values, Schedule::FtOrigin, levels, cfg, hooks);
  EXPECT_EQ(saved, (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(steps, 16);
  EXPECT_EQ(r.selected_epoch, 2);
  EXPECT_EQ(train(model, init.values, Schedule::CL, levels, cfg, hooks).selected_epoch, 4);
  EXPECT_EQ(r.trace.epochs[2].checkpoint, "ckpt_epoch2.bin");
  EXPECT_EQ(r.trace.summary()["epochs"].size(), 5u);
}

TEST(Training, EarlyStopping) {
  const auto seqs = random_sequences(16, 20, 2);
  const std::array<std::vector<mini::Sequence>, 3> levels{seqs, seqs, seqs};
  const auto init = mini::init_params(20, 4, 6, 1);
  const mini::MiniModel model(init.layout);
  TrainerConfig cfg = quick_cfg();
  cfg.epochs = 10;
  cfg.patience = 2;
  TrainHooks<mini::MiniModel> hooks;
  hooks.validate = [](int e, const std::vector<double>&) {
    const double v = e <= 2 ? e : 1.0;
    return std::array<double, 3>{v, v, v};
  };
  const auto r = train(model, init.values, Schedule::FtOrigin, levels, cfg, hooks);
  EXPECT_TRUE(r.trace.stopped_early);
  EXPECT_EQ(r.trace.epochs.back().epoch, 4);
  EXPECT_EQ(r.selected_epoch, 2);
}

TEST(Training, NonFiniteLossStops) {
  const auto seqs = random_sequences(16, 20, 2);
  const std::array<std::vector<mini::Sequence>, 3> levels{seqs, seqs, seqs};
  const auto init = mini::init_params(20, 4, 6, 1);
  const mini::MiniModel model(init.layout);
  TrainerConfig cfg = quick_cfg();
  cfg.alpha = cfg.gamma = 1e6;
  cfg.epochs = 5;
  EXPECT_THROW(train(model, init.values, Schedule::RoFT, levels, cfg), NonFiniteLoss);
}

TEST(Config, Validation) {
  TrainerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 0.0;
  EXPECT_NO_THROW(c.validate());
  c.alpha = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.batch_size = 5;
  EXPECT_THROW(c.validate(), curriculum::OddBatchSize);
  c = {};
  EXPECT_EQ(c.warmup_for(Schedule::RoFT), 0);
  EXPECT_EQ(c.warmup_for(Schedule::FtOrigin), 1000);
  c.warmup_steps = 7;
  EXPECT_EQ(c.warmup_for(Schedule::RoFT), 7);
}

TEST(LearningRate, WarmupThenLinearDecay) {
  EXPECT_DOUBLE_EQ(lr_multiplier(0, 20, 10, true), 0.0);
  EXPECT_DOUBLE_EQ(lr_multiplier(5, 20, 10, true), 0.5);
  EXPECT_DOUBLE_EQ(lr_multiplier(10, 20, 10, true), 1.0);
  EXPECT_DOUBLE_EQ(lr_multiplier(15, 20, 10, true), 0.5);
  EXPECT_DOUBLE_EQ(lr_multiplier(15, 20, 10, false), 1.0);
  EXPECT_DOUBLE_EQ(lr_multiplier(0, 20, 0, true), 1.0);
}

TEST(WeightDecay, AppliedOnOuterUpdates) {
  std::vector<double> theta{1.0, -2.0};
  meta::detail::sgd(theta, {0.0, 0.0}, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(theta[0], 0.95);
  EXPECT_DOUBLE_EQ(theta[1], -1.9);
}

TEST(Selection, BestMeanEarliestTie) {
  auto rec = [](int e, std::array<double, 3> v) {
    EpochRecord r;
    r.epoch = e;
    r.validation = v;
    return r;
  };
  EXPECT_EQ(select_checkpoint({rec(1, {1, 2, 3}), rec(2, {3, 3, 3}), rec(3, {2, 4, 3})}), 2);
  EXPECT_EQ(select_checkpoint({rec(1, {5, 5, 5}), rec(2, {1, 1, 1})}), 1);
  EXPECT_EQ(select_for(Schedule::CL, {rec(1, {5, 5, 5}), rec(2, {1, 1, 1})}), 2);
  EpochRecord bare;
  bare.epoch = 1;
  EXPECT_THROW(select_checkpoint({bare}), MissingValidation);
  EXPECT_THROW(select_checkpoint({}), MissingValidation);
}

TEST(Training, OriginLossFallsOverFirstEpoch) {
  const auto bundle = curriculum::build_semantic_obfuscation(curricode::testing::synthetic_corpus(64, 4));
  for (auto schedule : {Schedule::FtOrigin, Schedule::RoFT}) {
    pipeline::TrainJob job;
    job.schedule = schedule;
    job.cfg = quick_cfg();
    job.cfg.alpha = job.cfg.beta = job.cfg.gamma = 0.2;
    job.cfg.epochs = 1;
    job.d = 16;
    job.d_out = 24;
    const auto r = pipeline::run_training(bundle, nullptr, job).result;
    std::vector<double> l1;
    for (const auto& s : r.trace.steps) l1.push_back(s.losses.at("L1"));
    ASSERT_GE(l1.size(), 8u);
    const auto half = l1.begin() + static_cast<long>(l1.size() / 2);
    const double first = std::accumulate(l1.begin(), half, 0.0) / static_cast<double>(half - l1.begin());
    const double second = std::accumulate(half, l1.end(), 0.0) / static_cast<double>(l1.end() - half);
    EXPECT_LT(second, first) << schedule_name(schedule);
  }
}
