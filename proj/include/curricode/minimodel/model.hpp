#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "curricode/detail/random.hpp"
#include "curricode/minimodel/dual.hpp"
#include "curricode/minimodel/vocab.hpp"

namespace curricode::mini {

class EmptyTarget : public Error {
 public:
  EmptyTarget() : Error("target sequence is empty") {}
};

/// Block layout of the flat parameter vector:
///   E  token embeddings      |V| x d
///   W  decoder matrix        d_out x 2d
///   b  decoder bias          d_out
///   P  output projection     |V| x d_out
struct Layout {
  std::size_t vocab = 0;
  std::size_t d = 0;
  std::size_t d_out = 0;

  [[nodiscard]] std::size_t e_size() const { return vocab * d; }
  [[nodiscard]] std::size_t w_size() const { return d_out * 2 * d; }
  [[nodiscard]] std::size_t b_size() const { return d_out; }
  [[nodiscard]] std::size_t p_size() const { return vocab * d_out; }
  [[nodiscard]] std::size_t e_off() const { return 0; }
  [[nodiscard]] std::size_t w_off() const { return e_size(); }
  [[nodiscard]] std::size_t b_off() const { return w_off() + w_size(); }
  [[nodiscard]] std::size_t p_off() const { return b_off() + b_size(); }
  [[nodiscard]] std::size_t size() const { return p_off() + p_size(); }

  friend bool operator==(const Layout&, const Layout&) = default;
};

struct ParamVector {
  Layout layout;
  std::vector<double> values;

  [[nodiscard]] std::span<const double> embeddings() const { return block(layout.e_off(), layout.e_size()); }
  [[nodiscard]] std::span<const double> decoder() const { return block(layout.w_off(), layout.w_size()); }
  [[nodiscard]] std::span<const double> bias() const { return block(layout.b_off(), layout.b_size()); }
  [[nodiscard]] std::span<const double> projection() const { return block(layout.p_off(), layout.p_size()); }
  [[nodiscard]] bool finite() const {
    for (double x : values)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  [[nodiscard]] std::span<const double> block(std::size_t off, std::size_t n) const {
    return std::span<const double>(values).subspan(off, n);
  }
};

/// Seeded uniform init in [-0.08, 0.08]; the bias block starts at zero.
inline ParamVector init_params(std::size_t vocab_size, std::size_t d, std::size_t d_out, std::uint64_t seed) {
  if (vocab_size < 1 || d < 1 || d_out < 1) throw Error("model dimensions must be at least 1");
  ParamVector p;
  p.layout = {vocab_size, d, d_out};
  p.values.assign(p.layout.size(), 0.0);
  curricode::detail::Rng rng(curricode::detail::derive_seed(seed, "init"));
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (i >= p.layout.b_off() && i < p.layout.p_off()) continue;
    p.values[i] = rng.uniform(-0.08, 0.08);
  }
  return p;
}

using Batch = std::vector<const Sequence*>;

namespace detail {

/// Batch loss L = -(1/N) sum_i (1/T_i) sum_t log p(y_t | y_<t, x),
/// and, when `grad` is non-null, its exact gradient (accumulated into `grad`,
/// which must be zeroed by the caller). Scalar type T is double or Dual.
template <class T>
T loss_grad(const Layout& L, const T* theta, const Batch& batch, T* grad) {
  using std::exp;
  using std::log;
  const std::size_t d = L.d, h2 = 2 * d, dout = L.d_out, V = L.vocab;
  const T* E = theta + L.e_off();
  const T* W = theta + L.w_off();
  const T* b = theta + L.b_off();
  const T* P = theta + L.p_off();
  T* gE = grad ? grad + L.e_off() : nullptr;
  T* gW = grad ? grad + L.w_off() : nullptr;
  T* gb = grad ? grad + L.b_off() : nullptr;
  T* gP = grad ? grad + L.p_off() : nullptr;

  std::vector<T> c(d), h(h2), u(dout), z(V), p(V), du(dout), dh(h2), dc(d);
  T total = T(0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const Sequence* ex : batch) {
    if (ex->tgt.empty()) throw EmptyTarget();
    const double w = inv_n / static_cast<double>(ex->tgt.size());
    for (auto& x : c) x = T(0.0);
    if (!ex->src.empty()) {
      const double inv_m = 1.0 / static_cast<double>(ex->src.size());
      for (int tok : ex->src) {
        const T* row = E + static_cast<std::size_t>(tok) * d;
        for (std::size_t k = 0; k < d; ++k) c[k] += row[k];
      }
      for (auto& x : c) x *= T(inv_m);
    }
    for (auto& x : dc) x = T(0.0);
    T ex_loss = T(0.0);
    int prev = kBos;
    for (int y : ex->tgt) {
      const T* prow = E + static_cast<std::size_t>(prev) * d;
      for (std::size_t k = 0; k < d; ++k) {
        h[k] = c[k];
        h[d + k] = prow[k];
      }
      for (std::size_t j = 0; j < dout; ++j) {
        T acc = b[j];
        const T* wr = W + j * h2;
        for (std::size_t k = 0; k < h2; ++k) acc += wr[k] * h[k];
        u[j] = acc;
      }
      std::size_t arg = 0;
      for (std::size_t v = 0; v < V; ++v) {
        T acc = T(0.0);
        const T* pr = P + v * dout;
        for (std::size_t j = 0; j < dout; ++j) acc += pr[j] * u[j];
        z[v] = acc;
        if (value(acc) > value(z[arg])) arg = v;
      }
      const T zmax = z[arg];
      T sum = T(0.0);
      for (std::size_t v = 0; v < V; ++v) {
        p[v] = exp(z[v] - zmax);
        sum += p[v];
      }
      ex_loss -= (z[static_cast<std::size_t>(y)] - zmax) - log(sum);
      if (grad) {
        for (auto& x : du) x = T(0.0);
        for (std::size_t v = 0; v < V; ++v) {
          T dz = p[v] / sum;
          if (static_cast<int>(v) == y) dz -= T(1.0);
          dz *= T(w);
          T* gpr = gP + v * dout;
          const T* pr = P + v * dout;
          for (std::size_t j = 0; j < dout; ++j) {
            gpr[j] += dz * u[j];
            du[j] += pr[j] * dz;
          }
        }
        for (auto& x : dh) x = T(0.0);
        for (std::size_t j = 0; j < dout; ++j) {
          gb[j] += du[j];
          T* gwr = gW + j * h2;
          const T* wr = W + j * h2;
          for (std::size_t k = 0; k < h2; ++k) {
            gwr[k] += du[j] * h[k];
            dh[k] += wr[k] * du[j];
          }
        }
        for (std::size_t k = 0; k < d; ++k) dc[k] += dh[k];
        T* gprev = gE + static_cast<std::size_t>(prev) * d;
        for (std::size_t k = 0; k < d; ++k) gprev[k] += dh[d + k];
      }
      prev = y;
    }
    total += ex_loss * T(w);
    if (grad && !ex->src.empty()) {
      const double inv_m = 1.0 / static_cast<double>(ex->src.size());
      for (int tok : ex->src) {
        T* row = gE + static_cast<std::size_t>(tok) * d;
        for (std::size_t k = 0; k < d; ++k) row[k] += dc[k] * T(inv_m);
      }
    }
  }
  return total;
}

}  // namespace detail

/// The differentiable summarizer: mean-of-embeddings encoder, one affine
/// decoder step per target token, softmax over the shared vocabulary.
class MiniModel {
 public:
  using Example = Sequence;
  using Batch = mini::Batch;

  explicit MiniModel(Layout layout) : layout_(layout) {}

  [[nodiscard]] const Layout& layout() const { return layout_; }

  [[nodiscard]] double loss(const std::vector<double>& theta, const Batch& batch) const {
    check(theta);
    return detail::loss_grad<double>(layout_, theta.data(), batch, nullptr);
  }

  double loss_grad(const std::vector<double>& theta, const Batch& batch, std::vector<double>& grad) const {
    check(theta);
    grad.assign(theta.size(), 0.0);
    return detail::loss_grad<double>(layout_, theta.data(), batch, grad.data());
  }

  /// Hessian-vector product H(theta) v by forward-mode differentiation of
  /// the analytic gradient.
  void hvp(const std::vector<double>& theta, const Batch& batch, const std::vector<double>& v,
           std::vector<double>& out) const {
    check(theta);
    std::vector<Dual> th(theta.size()), g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) th[i] = Dual(theta[i], v[i]);
    detail::loss_grad<Dual>(layout_, th.data(), batch, g.data());
    out.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = g[i].d;
  }

  /// Softmax over the vocabulary for the next token given context ids.
  [[nodiscard]] std::vector<double> next_distribution(const std::vector<double>& theta,
                                                      const std::vector<int>& src, int prev) const {
    std::vector<double> c = context(theta, src), p;
    step(theta, c, prev, p);
    return p;
  }

  /// Argmax decoding until EOS or `max_len` tokens; ties go to the lowest id.
  [[nodiscard]] std::vector<int> greedy_decode(const std::vector<double>& theta, const std::vector<int>& src,
                                               std::size_t max_len = kMaxTarget) const {
    check(theta);
    const std::vector<double> c = context(theta, src);
    std::vector<double> p;
    std::vector<int> out;
    int prev = kBos;
    while (out.size() < max_len) {
      step(theta, c, prev, p);
      std::size_t arg = 0;
      for (std::size_t v = 1; v < p.size(); ++v)
        if (p[v] > p[arg]) arg = v;
      if (static_cast<int>(arg) == kEos) break;
      out.push_back(static_cast<int>(arg));
      prev = static_cast<int>(arg);
    }
    return out;
  }

 private:
  void check(const std::vector<double>& theta) const {
    if (theta.size() != layout_.size()) throw Error("parameter vector does not match the model layout");
  }

  [[nodiscard]] std::vector<double> context(const std::vector<double>& theta, const std::vector<int>& src) const {
    std::vector<double> c(layout_.d, 0.0);
    if (src.empty()) return c;
    for (int tok : src)
      for (std::size_t k = 0; k < layout_.d; ++k) c[k] += theta[layout_.e_off() + static_cast<std::size_t>(tok) * layout_.d + k];
    const double inv = 1.0 / static_cast<double>(src.size());
    for (auto& x : c) x *= inv;
    return c;
  }

  void step(const std::vector<double>& theta, const std::vector<double>& c, int prev, std::vector<double>& p) const {
    const std::size_t d = layout_.d, h2 = 2 * d, dout = layout_.d_out, V = layout_.vocab;
    std::vector<double> h(h2), u(dout);
    for (std::size_t k = 0; k < d; ++k) {
      h[k] = c[k];
      h[d + k] = theta[layout_.e_off() + static_cast<std::size_t>(prev) * d + k];
    }
    for (std::size_t j = 0; j < dout; ++j) {
      double acc = theta[layout_.b_off() + j];
      for (std::size_t k = 0; k < h2; ++k) acc += theta[layout_.w_off() + j * h2 + k] * h[k];
      u[j] = acc;
    }
    p.assign(V, 0.0);
    double zmax = -INFINITY;
    for (std::size_t v = 0; v < V; ++v) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dout; ++j) acc += theta[layout_.p_off() + v * dout + j] * u[j];
      p[v] = acc;
      zmax = std::max(zmax, acc);
    }
    double sum = 0.0;
    for (auto& x : p) {
      x = std::exp(x - zmax);
      sum += x;
    }
    for (auto& x : p) x /= sum;
  }

  Layout layout_;
};

}  // namespace curricode::mini
