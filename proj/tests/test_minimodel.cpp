#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "curricode/minimodel.hpp"
#include "support/model_draws.hpp"
#include "support/synthetic_corpus.hpp"
#include "support/test_data.hpp"

using namespace curricode;
using namespace curricode::mini;
using curricode::testing::model_draw;

TEST(Vocab, SpecialsFirstThenFrequency) {
  const auto v = Vocab::build({{"b", "a", "b"}, {"c", "a", "b"}});
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "<bos>", "<eos>", "b", "a", "c"}));
  EXPECT_EQ(v.id("zzz"), kUnk);
  EXPECT_EQ(Vocab::from_json(v.to_json()), v);
  EXPECT_EQ(Vocab::from_json(v.to_json()).hash(), v.hash());
  EXPECT_THROW(Vocab::from_json(nlohmann::json::array({"a", "b"})), Error);
  EXPECT_EQ(Vocab::build({{"a", "b", "c"}}, 2).size(), 4u);
}

TEST(Encode, TruncatesAndAppendsEos) {
  const auto v = Vocab::build({{"def", "f", "(", ")", ":", "x"}, {"sum", "all"}});
  const auto s = encode(v, "def f(): x", "Sum all items", 3, 3);
  EXPECT_EQ(s.src.size(), 3u);
  EXPECT_EQ(s.tgt, (std::vector<int>{v.id("sum"), v.id("all"), kEos}));
  EXPECT_EQ(detokenize(v, {v.id("sum"), kUnk, v.id("all"), kEos}), "sum all");
  EXPECT_EQ(code_tokens("x1 = a.b+1"), (std::vector<std::string>{"x1", "=", "a", ".", "b", "+", "1"}));
}

TEST(Loss, UniformAtZeroParameters) {
  auto m = model_draw(3);
  std::fill(m.theta.begin(), m.theta.end(), 0.0);
  const MiniModel model(m.layout);
  EXPECT_NEAR(model.loss(m.theta, m.batch), std::log(static_cast<double>(m.layout.vocab)), 1e-12);
}

TEST(Loss, NearZeroForConstructedParameters) {
  // Target is just EOS; bias and projection make EOS dominate every step.
  const Layout L{8, 3, 2};
  std::vector<double> theta(L.size(), 0.0);
  theta[L.b_off()] = 1.0;
  theta[L.p_off() + static_cast<std::size_t>(kEos) * L.d_out] = 60.0;
  Sequence s{{4, 5}, {kEos}};
  const MiniModel model(L);
  const double l = model.loss(theta, {&s});
  EXPECT_GE(l, 0.0);
  EXPECT_LT(l, 1e-20);
}

TEST(Loss, RejectsWrongLayout) {
  const auto m = model_draw(1);
  const MiniModel model(m.layout);
  std::vector<double> short_theta(m.theta.begin(), m.theta.end() - 1);
  EXPECT_THROW((void)model.loss(short_theta, m.batch), Error);
}

TEST(Loss, GradReturnsSameLoss) {
  const auto m = model_draw(2);
  const MiniModel model(m.layout);
  std::vector<double> g;
  EXPECT_DOUBLE_EQ(model.loss_grad(m.theta, m.batch, g), model.loss(m.theta, m.batch));
  EXPECT_EQ(g.size(), m.theta.size());
}

TEST(Gradient, MatchesCentralDifferences) {
  for (std::uint64_t draw = 1; draw <= 5; ++draw) {
    const auto m = model_draw(100 + draw);
    const auto r = curricode::testing::fd_gradient_check(m, 200, draw);
    EXPECT_LT(r.max_rel, 1e-4) << "draw " << draw;
  }
}

TEST(Hvp, MatchesDifferenceOfGradients) {
  for (std::uint64_t draw = 1; draw <= 3; ++draw) {
    const auto m = model_draw(200 + draw);
    const MiniModel model(m.layout);
    curricode::detail::Rng rng(draw);
    std::vector<double> v(m.theta.size());
    for (auto& x : v) x = rng.uniform(-1, 1);
    std::vector<double> hv, gp, gm;
    model.hvp(m.theta, m.batch, v, hv);
    const double eps = 1e-5;
    std::vector<double> tp = m.theta, tm = m.theta;
    for (std::size_t i = 0; i < v.size(); ++i) {
      tp[i] += eps * v[i];
      tm[i] -= eps * v[i];
    }
    model.loss_grad(tp, m.batch, gp);
    model.loss_grad(tm, m.batch, gm);
    double max_err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      max_err = std::max(max_err, std::abs(hv[i] - (gp[i] - gm[i]) / (2 * eps)));
      scale = std::max(scale, std::abs(hv[i]));
    }
    EXPECT_LT(max_err, 1e-6 * std::max(1.0, scale)) << "draw " << draw;
  }
}

TEST(Hvp, IsSymmetric) {
  const auto m = model_draw(7);
  const MiniModel model(m.layout);
  curricode::detail::Rng rng(9);
  std::vector<double> u(m.theta.size()), w(m.theta.size()), hu, hw;
  for (auto& x : u) x = rng.uniform(-1, 1);
  for (auto& x : w) x = rng.uniform(-1, 1);
  model.hvp(m.theta, m.batch, u, hu);
  model.hvp(m.theta, m.batch, w, hw);
  const double a = std::inner_product(w.begin(), w.end(), hu.begin(), 0.0);
  const double b = std::inner_product(u.begin(), u.end(), hw.begin(), 0.0);
  EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(a)));
}

TEST(Decode, DistributionSumsToOne) {
  const auto m = model_draw(4);
  const MiniModel model(m.layout);
  const auto p = model.next_distribution(m.theta, m.seqs[0].src, kBos);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  for (double x : p) EXPECT_GT(x, 0.0);
}

TEST(Decode, TiesGoToLowestId) {
  const Layout L{10, 2, 3};
  const std::vector<double> zero(L.size(), 0.0);
  const MiniModel model(L);
  EXPECT_EQ(model.greedy_decode(zero, {4, 5}, 3), (std::vector<int>{kPad, kPad, kPad}));
}

TEST(Decode, StopsAtEos) {
  const Layout L{8, 3, 2};
  std::vector<double> theta(L.size(), 0.0);
  theta[L.b_off()] = 1.0;
  theta[L.p_off() + static_cast<std::size_t>(kEos) * L.d_out] = 5.0;
  EXPECT_TRUE(MiniModel(L).greedy_decode(theta, {4}).empty());
}

TEST(Init, SeededAndBiasZero) {
  const auto a = init_params(20, 4, 6, 1), b = init_params(20, 4, 6, 1), c = init_params(20, 4, 6, 2);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  for (double x : a.bias()) EXPECT_EQ(x, 0.0);
  for (double x : a.values) EXPECT_LE(std::abs(x), 0.08);
  EXPECT_THROW(init_params(0, 4, 6, 1), Error);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto p = init_params(15, 3, 5, 4);
  p.values[3] = -0.0;
  p.values[4] = 1e-310;
  const auto path = curricode::testing::temp_dir("ckpt") / "c.bin";
  save_checkpoint(path, p, 77, 4, {{"epoch", 2}});
  const auto c = load_checkpoint(path);
  EXPECT_EQ(c.params.layout.size(), p.layout.size());
  ASSERT_EQ(c.params.values.size(), p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(c.params.values[i]), std::bit_cast<std::uint64_t>(p.values[i]));
  EXPECT_EQ(c.header["vocab_hash"], 77);
  EXPECT_EQ(c.header["epoch"], 2);
  std::ofstream(path, std::ios::app) << "x";
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Overfit, MicroCorpusIsMemorized) {
  const auto ds = curricode::testing::synthetic_corpus(12, 8);
  std::vector<std::vector<std::string>> corpora;
  for (const auto& ex : ds.examples) {
    corpora.push_back(code_tokens(ex.code));
    corpora.push_back(summary_tokens(ex.docstring));
  }
  const auto vocab = Vocab::build(corpora);
  std::vector<Sequence> seqs;
  for (const auto& ex : ds.examples) seqs.push_back(encode(vocab, ex.code, ex.docstring));
  Batch batch;
  for (const auto& s : seqs) batch.push_back(&s);
  auto p = init_params(vocab.size(), 32, 64, 3);
  const MiniModel model(p.layout);
  std::vector<double> g;
  double loss = 0.0;
  for (int step = 0; step < 3000; ++step) {
    loss = model.loss_grad(p.values, batch, g);
    for (std::size_t i = 0; i < g.size(); ++i) p.values[i] -= 0.5 * g[i];
  }
  int exact = 0;
  for (const auto& s : seqs) {
    auto out = model.greedy_decode(p.values, s.src);
    out.push_back(kEos);
    exact += out == s.tgt;
  }
  EXPECT_GE(exact * 10, static_cast<int>(seqs.size()) * 9) << "final loss " << loss;
}
