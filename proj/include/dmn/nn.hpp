#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dmn/tensor.hpp"

namespace dmn {

using Rng = std::mt19937_64;

enum class InitScheme { UniformFan, Zeros };

// Fan-based uniform initialization: entries ~ U(-b, b) with
// b = sqrt(6 / (fan_in + fan_out)). Zeros for biases.
template <class Real>
Tensor<Real> init_tensor(Rng& rng, InitScheme scheme,
                         std::vector<std::size_t> shape, std::size_t fan_in,
                         std::size_t fan_out) {
  if (Tensor<Real>::shape_numel(shape) == 0) {
    throw ConfigError("init_tensor: empty shape");
  }
  auto t = Tensor<Real>::zeros(std::move(shape));
  if (scheme == InitScheme::UniformFan) {
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data) v = static_cast<Real>(dist(rng));
  }
  return t;
}

template <class Real>
Parameter<Real> init_weight(Rng& rng, std::string name, std::size_t rows,
                            std::size_t cols) {
  return Parameter<Real>(std::move(name),
                         init_tensor<Real>(rng, InitScheme::UniformFan,
                                           {rows, cols}, cols, rows));
}

template <class Real>
Parameter<Real> init_bias(std::string name, std::size_t n) {
  Parameter<Real> p(std::move(name), Tensor<Real>::zeros({n}));
  p.decay = false;  // biases are exempt from L2
  return p;
}

// ---------------------------------------------------------------------------
// GRU cell: update gate z, reset gate r, candidate state, convex blend
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   hc = tanh(W_h x + r ∘ (U_h h) + b_h)
//   h' = z ∘ h + (1 - z) ∘ hc
// ---------------------------------------------------------------------------
template <class Real>
struct GruParams {
  Parameter<Real> w_z, u_z, b_z;
  Parameter<Real> w_r, u_r, b_r;
  Parameter<Real> w_h, u_h, b_h;

  static GruParams init(const std::string& prefix, std::size_t n_hidden,
                        std::size_t n_input, Rng& rng) {
    GruParams p;
    p.w_z = init_weight<Real>(rng, prefix + ".w_z", n_hidden, n_input);
    p.u_z = init_weight<Real>(rng, prefix + ".u_z", n_hidden, n_hidden);
    p.b_z = init_bias<Real>(prefix + ".b_z", n_hidden);
    p.w_r = init_weight<Real>(rng, prefix + ".w_r", n_hidden, n_input);
    p.u_r = init_weight<Real>(rng, prefix + ".u_r", n_hidden, n_hidden);
    p.b_r = init_bias<Real>(prefix + ".b_r", n_hidden);
    p.w_h = init_weight<Real>(rng, prefix + ".w_h", n_hidden, n_input);
    p.u_h = init_weight<Real>(rng, prefix + ".u_h", n_hidden, n_hidden);
    p.b_h = init_bias<Real>(prefix + ".b_h", n_hidden);
    return p;
  }

  std::size_t hidden() const { return w_z.value.shape[0]; }
  std::size_t input() const { return w_z.value.shape[1]; }

  void collect(std::vector<Parameter<Real>*>& out) {
    for (auto* p : {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_h, &u_h, &b_h}) {
      out.push_back(p);
    }
  }
};

template <class Real>
Val<Real> gru_step(Graph<Real>& g, GruParams<Real>& p, Val<Real> x,
                   Val<Real> h_prev) {
  if (g.value(x).numel() != p.input() ||
      g.value(h_prev).numel() != p.hidden()) {
    throw ShapeError("gru_step: input " + g.value(x).shape_string() +
                     " / state " + g.value(h_prev).shape_string() +
                     " do not match cell dims (" + std::to_string(p.hidden()) +
                     "," + std::to_string(p.input()) + ")");
  }
  auto z = sigmoid(matmul(g.param(p.w_z), x) + matmul(g.param(p.u_z), h_prev) +
                   g.param(p.b_z));
  auto r = sigmoid(matmul(g.param(p.w_r), x) + matmul(g.param(p.u_r), h_prev) +
                   g.param(p.b_r));
  auto hc = tanh_(matmul(g.param(p.w_h), x) +
                  r * matmul(g.param(p.u_h), h_prev) + g.param(p.b_h));
  return z * h_prev + affine(z, Real(-1), Real(1)) * hc;
}

template <class Real>
Val<Real> zero_state(Graph<Real>& g, std::size_t n) {
  return g.input(Tensor<Real>::zeros({n}));
}

// Runs the cell over a sequence; returns all hidden states. h0 defaults to
// the zero vector. An empty input yields an empty list.
template <class Real>
std::vector<Val<Real>> gru_sequence(Graph<Real>& g, GruParams<Real>& p,
                                    std::span<const Val<Real>> xs,
                                    std::optional<Val<Real>> h0 = {}) {
  std::vector<Val<Real>> states;
  states.reserve(xs.size());
  Val<Real> h = h0 ? *h0 : zero_state(g, p.hidden());
  for (auto x : xs) {
    h = gru_step(g, p, x, h);
    states.push_back(h);
  }
  return states;
}

// ---------------------------------------------------------------------------
// Word embeddings: one column per token.
// ---------------------------------------------------------------------------
template <class Real>
struct EmbeddingMatrix {
  Parameter<Real> weights;  // n_input x vocab

  static EmbeddingMatrix init(std::size_t n_input, std::size_t vocab,
                              Rng& rng) {
    EmbeddingMatrix e;
    e.weights = init_weight<Real>(rng, "embedding", n_input, vocab);
    return e;
  }

  std::size_t dim() const { return weights.value.shape[0]; }
  std::size_t vocab_size() const { return weights.value.shape[1]; }
};

template <class Real>
Val<Real> embed(Graph<Real>& g, EmbeddingMatrix<Real>& emb, std::size_t token) {
  if (token >= emb.vocab_size()) {
    throw IndexError("embed: token id " + std::to_string(token) +
                     " out of range for vocab of " +
                     std::to_string(emb.vocab_size()));
  }
  return column(g.param(emb.weights), token);
}

// ---------------------------------------------------------------------------
// Linear layer y = W x + b.
// ---------------------------------------------------------------------------
template <class Real>
struct LinearParams {
  Parameter<Real> weight;
  Parameter<Real> bias;

  static LinearParams init(const std::string& prefix, std::size_t out,
                           std::size_t in, Rng& rng) {
    LinearParams p;
    p.weight = init_weight<Real>(rng, prefix + ".weight", out, in);
    p.bias = init_bias<Real>(prefix + ".bias", out);
    return p;
  }

  void collect(std::vector<Parameter<Real>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <class Real>
Val<Real> linear(Graph<Real>& g, LinearParams<Real>& p, Val<Real> x) {
  return matmul(g.param(p.weight), x) + g.param(p.bias);
}

// ---------------------------------------------------------------------------
// Inverted dropout on an embedded vector: at train time each entry is zeroed
// with probability rate and survivors are scaled by 1/(1-rate), so evaluation
// is the identity.
// ---------------------------------------------------------------------------
template <class Real>
Val<Real> dropout_embed(Graph<Real>& g, Val<Real> v, Real rate, Rng& rng,
                        bool training) {
  if (rate < Real(0) || rate >= Real(1)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " +
                      std::to_string(static_cast<double>(rate)));
  }
  if (!training || rate == Real(0)) return v;
  const Tensor<Real>& x = g.value(v);
  Tensor<Real> mask = Tensor<Real>::zeros(x.shape);
  std::bernoulli_distribution drop(static_cast<double>(rate));
  const Real keep_scale = Real(1) / (Real(1) - rate);
  for (auto& m : mask.data) m = drop(rng) ? Real(0) : keep_scale;
  return v * g.input(std::move(mask));
}

}  // namespace dmn
