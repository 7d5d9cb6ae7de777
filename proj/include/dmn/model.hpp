#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmn/data.hpp"
#include "dmn/nn.hpp"
#include "dmn/tensor.hpp"

namespace dmn {

enum class AttentionMode { SigmoidGru, Softmax };
enum class AnswerMode { Sequence, PerToken, SingleClass };

inline AttentionMode attention_mode_from(const std::string& name) {
  if (name == "sigmoid-gru") return AttentionMode::SigmoidGru;
  if (name == "softmax") return AttentionMode::Softmax;
  throw ConfigError("unknown attention mode '" + name +
                    "' (expected sigmoid-gru or softmax)");
}

inline AnswerMode answer_mode_from(const std::string& name) {
  if (name == "sequence") return AnswerMode::Sequence;
  if (name == "per-token") return AnswerMode::PerToken;
  if (name == "single-class") return AnswerMode::SingleClass;
  throw ConfigError("unknown answer mode '" + name +
                    "' (expected sequence, per-token or single-class)");
}

inline std::string to_string(AttentionMode m) {
  return m == AttentionMode::SigmoidGru ? "sigmoid-gru" : "softmax";
}

inline std::string to_string(AnswerMode m) {
  switch (m) {
    case AnswerMode::Sequence: return "sequence";
    case AnswerMode::PerToken: return "per-token";
    default: return "single-class";
  }
}

struct DmnConfig {
  std::size_t n_input = 64;       // embedding width
  std::size_t n_hidden = 64;
  std::size_t gate_hidden = 0;    // 0 means n_hidden
  std::size_t max_passes = 3;     // 0 routes the encoder state straight to the answer
  AttentionMode attention = AttentionMode::SigmoidGru;
  AnswerMode answer_mode = AnswerMode::Sequence;
  bool use_sentinel = false;      // extra end-of-passes slot that stops iteration
  bool share_encoder = false;     // question module reuses the input GRU
  std::size_t max_answer_len = 10;

  std::size_t gate_dim() const { return gate_hidden ? gate_hidden : n_hidden; }

  void validate() const {
    if (n_input == 0 || n_hidden == 0) {
      throw ConfigError("embedding and hidden dims must be positive");
    }
    if (max_answer_len < 1) {
      throw ConfigError("max_answer_len must be at least 1");
    }
    if (answer_mode == AnswerMode::PerToken &&
        attention == AttentionMode::Softmax) {
      throw ConfigError(
          "per-token answers need the gated recurrent episode; "
          "use attention=sigmoid-gru");
    }
  }
};

// Two-layer gate scorer over the similarity feature vector, plus the shared
// bilinear form.
template <class Real>
struct GateNetParams {
  LinearParams<Real> hidden;   // gate_dim x (7*n_hidden + 2)
  LinearParams<Real> out;      // 1 x gate_dim
  Parameter<Real> bilinear;    // n_hidden x n_hidden, shared by both terms

  static GateNetParams init(std::size_t n_hidden, std::size_t gate_dim,
                            Rng& rng) {
    GateNetParams p;
    p.hidden = LinearParams<Real>::init("gate.hidden", gate_dim,
                                        7 * n_hidden + 2, rng);
    p.out = LinearParams<Real>::init("gate.out", 1, gate_dim, rng);
    p.bilinear = init_weight<Real>(rng, "gate.bilinear", n_hidden, n_hidden);
    return p;
  }

  void collect(std::vector<Parameter<Real>*>& v) {
    hidden.collect(v);
    out.collect(v);
    v.push_back(&bilinear);
  }
};

template <class Real>
struct DmnModel {
  DmnConfig cfg;
  Vocab vocab;
  std::vector<std::size_t> answer_classes;  // class index -> vocab token id
  EmbeddingMatrix<Real> embedding;          // shared by input and question
  GruParams<Real> input_gru;
  GruParams<Real> question_gru;  // unused when cfg.share_encoder
  GruParams<Real> episode_gru;
  GruParams<Real> memory_gru;    // tied across passes
  GruParams<Real> answer_gru;    // input is [previous answer one-hot, q]
  GateNetParams<Real> gate;
  Parameter<Real> answer_w;      // |classes| x n_hidden
  Parameter<Real> sentinel;      // end-of-passes slot representation

  static constexpr std::size_t kNoClass = std::numeric_limits<std::size_t>::max();

  static DmnModel init(DmnConfig cfg, Vocab vocab,
                       std::vector<std::size_t> answer_classes,
                       std::uint64_t seed) {
    cfg.validate();
    if (answer_classes.empty()) {
      throw ConfigError("answer class set must not be empty");
    }
    DmnModel m;
    m.cfg = cfg;
    m.vocab = std::move(vocab);
    m.answer_classes = std::move(answer_classes);
    Rng rng(seed);
    m.embedding =
        EmbeddingMatrix<Real>::init(cfg.n_input, m.vocab.size(), rng);
    m.input_gru =
        GruParams<Real>::init("input_gru", cfg.n_hidden, cfg.n_input, rng);
    m.question_gru =
        GruParams<Real>::init("question_gru", cfg.n_hidden, cfg.n_input, rng);
    m.episode_gru =
        GruParams<Real>::init("episode_gru", cfg.n_hidden, cfg.n_hidden, rng);
    m.memory_gru =
        GruParams<Real>::init("memory_gru", cfg.n_hidden, cfg.n_hidden, rng);
    m.answer_gru = GruParams<Real>::init(
        "answer_gru", cfg.n_hidden, m.answer_classes.size() + cfg.n_hidden,
        rng);
    m.gate = GateNetParams<Real>::init(cfg.n_hidden, cfg.gate_dim(), rng);
    m.answer_w = init_weight<Real>(rng, "answer_w", m.answer_classes.size(),
                                   cfg.n_hidden);
    m.sentinel = Parameter<Real>(
        "sentinel", init_tensor<Real>(rng, InitScheme::UniformFan,
                                      {cfg.n_hidden}, 1, cfg.n_hidden));
    m.sentinel.decay = false;
    return m;
  }

  std::vector<Parameter<Real>*> parameters() {
    std::vector<Parameter<Real>*> v;
    v.push_back(&embedding.weights);
    input_gru.collect(v);
    if (!cfg.share_encoder) question_gru.collect(v);
    episode_gru.collect(v);
    memory_gru.collect(v);
    answer_gru.collect(v);
    gate.collect(v);
    v.push_back(&answer_w);
    if (cfg.use_sentinel) v.push_back(&sentinel);
    return v;
  }

  // Class index of a vocab token id, or kNoClass.
  std::size_t class_of(std::size_t vocab_id) const {
    for (std::size_t k = 0; k < answer_classes.size(); ++k) {
      if (answer_classes[k] == vocab_id) return k;
    }
    return kNoClass;
  }

  std::size_t eos_class() const {
    return class_of(vocab.end_of_sequence_id());
  }
};

// Full vocabulary as the answer class set (sequence decoding).
inline std::vector<std::size_t> sequence_answer_classes(const Vocab& v) {
  std::vector<std::size_t> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

// Distinct answer tokens of a corpus, in first-occurrence order.
inline std::vector<std::size_t> label_answer_classes(
    const Vocab& v, const std::vector<Story>& stories) {
  std::vector<std::size_t> out;
  for (const auto& s : stories) {
    for (const auto& a : s.answer) {
      const std::size_t id = v.id(a);
      if (std::find(out.begin(), out.end(), id) == out.end()) {
        out.push_back(id);
      }
    }
  }
  return out;
}

template <class Real>
struct ForwardOptions {
  bool training = false;
  Real dropout = Real(0);
  Rng* rng = nullptr;
};

// ---------------------------------------------------------------------------
// Input module.
// ---------------------------------------------------------------------------
template <class Real>
struct FactSequence {
  std::vector<Val<Real>> facts;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // token range per fact
  Val<Real> last_hidden;   // encoder state after the final token
  bool word_level = false; // one fact per word (no sentence markers)
};

namespace detail {

template <class Real>
Val<Real> embed_token(Graph<Real>& g, DmnModel<Real>& m, std::size_t token,
                      const ForwardOptions<Real>& opts) {
  Val<Real> x = embed(g, m.embedding, token);
  if (opts.training && opts.dropout > Real(0)) {
    if (!opts.rng) throw ContractError("training forward pass needs an rng");
    x = dropout_embed(g, x, opts.dropout, *opts.rng, true);
  }
  return x;
}

}  // namespace detail

// Encodes tokens with the input GRU. Without sentence boundaries every
// hidden state is a fact; with boundaries an end-of-sentence marker token is
// appended to each sentence and only the states at those markers survive.
// `sentence_ends` holds exclusive end offsets into `tokens`, one per sentence.
template <class Real>
FactSequence<Real> encode_input(
    Graph<Real>& g, DmnModel<Real>& m, std::span<const std::size_t> tokens,
    const std::optional<std::vector<std::size_t>>& sentence_ends,
    const ForwardOptions<Real>& opts = {}) {
  if (tokens.empty()) throw ContractError("encode_input: empty token list");

  FactSequence<Real> out;
  Val<Real> h = zero_state(g, m.cfg.n_hidden);

  if (!sentence_ends) {
    out.word_level = true;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      h = gru_step(g, m.input_gru, detail::embed_token(g, m, tokens[t], opts),
                   h);
      out.facts.push_back(h);
      out.spans.emplace_back(t, t + 1);
    }
    out.last_hidden = h;
    return out;
  }

  const std::size_t eos = m.vocab.end_of_sentence_id();
  std::size_t start = 0;
  for (std::size_t end : *sentence_ends) {
    if (end <= start || end > tokens.size()) {
      throw ContractError("encode_input: bad sentence boundary " +
                          std::to_string(end));
    }
    for (std::size_t t = start; t < end; ++t) {
      h = gru_step(g, m.input_gru, detail::embed_token(g, m, tokens[t], opts),
                   h);
    }
    h = gru_step(g, m.input_gru, detail::embed_token(g, m, eos, opts), h);
    out.facts.push_back(h);
    out.spans.emplace_back(start, end);
    start = end;
  }
  if (out.facts.empty()) {
    throw ContractError("encode_input: no sentences");
  }
  out.last_hidden = h;
  return out;
}

// Question module: final hidden state over the question words. The embedding
// matrix is shared with the input module.
template <class Real>
Val<Real> encode_question(Graph<Real>& g, DmnModel<Real>& m,
                          std::span<const std::size_t> tokens,
                          const ForwardOptions<Real>& opts = {}) {
  if (tokens.empty()) throw ContractError("encode_question: empty question");
  GruParams<Real>& cell = m.cfg.share_encoder ? m.input_gru : m.question_gru;
  Val<Real> h = zero_state(g, m.cfg.n_hidden);
  for (std::size_t token : tokens) {
    h = gru_step(g, cell, detail::embed_token(g, m, token, opts), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Episodic memory module.
// ---------------------------------------------------------------------------

// Similarity feature vector
//   [c; m; q; c∘q; c∘m; |c-q|; |c-m|; cᵀWq; cᵀWm]
// of length 7*n_hidden + 2. The two matrix-vector products Wq and Wm are
// shared across facts within a pass, so they are taken precomputed here.
template <class Real>
Val<Real> gate_features_pre(Graph<Real>& g, Val<Real> c, Val<Real> m,
                            Val<Real> q, Val<Real> wq, Val<Real> wm) {
  const std::size_t n = g.value(c).numel();
  if (g.value(m).numel() != n || g.value(q).numel() != n) {
    throw ShapeError("gate features: fact " + g.value(c).shape_string() +
                     ", memory " + g.value(m).shape_string() + ", question " +
                     g.value(q).shape_string() + " must agree");
  }
  return concat<Real>({c, m, q, c * q, c * m, absdiff(c, q), absdiff(c, m),
                       dot(c, wq), dot(c, wm)});
}

template <class Real>
Val<Real> gate_features(Graph<Real>& g, Val<Real> c, Val<Real> m, Val<Real> q,
                        Val<Real> bilinear) {
  return gate_features_pre(g, c, m, q, matmul(bilinear, q),
                           matmul(bilinear, m));
}

template <class Real>
struct GateScore {
  Val<Real> pre;   // scalar score before the squashing, used by the loss
  Val<Real> gate;  // sigmoid of the score
};

template <class Real>
GateScore<Real> gate_score(Graph<Real>& g, GateNetParams<Real>& p, Val<Real> c,
                           Val<Real> m, Val<Real> q) {
  auto z = gate_features(g, c, m, q, g.param(p.bilinear));
  auto pre = linear(g, p.out, tanh_(linear(g, p.hidden, z)));
  return {pre, sigmoid(pre)};
}

template <class Real>
GateScore<Real> gate_score_pre(Graph<Real>& g, GateNetParams<Real>& p,
                               Val<Real> c, Val<Real> m, Val<Real> q,
                               Val<Real> wq, Val<Real> wm) {
  auto z = gate_features_pre(g, c, m, q, wq, wm);
  auto pre = linear(g, p.out, tanh_(linear(g, p.hidden, z)));
  return {pre, sigmoid(pre)};
}

// One attention pass over the facts.
//
// SigmoidGru: slot_values are post-sigmoid gates; the episode is the final
// state of a gate-modulated GRU over the facts.
// Softmax: slot_values are pre-activation scores; the episode is the
// softmax-weighted sum of the facts.
//
// slot_values may carry one extra trailing entry (the end-of-passes slot);
// it participates in softmax normalization but never contributes content.
template <class Real>
Val<Real> episode(Graph<Real>& g, AttentionMode mode,
                  std::span<const Val<Real>> facts,
                  std::span<const Val<Real>> slot_values,
                  GruParams<Real>& cell) {
  if (slot_values.size() != facts.size() &&
      slot_values.size() != facts.size() + 1) {
    throw ContractError("episode: " + std::to_string(slot_values.size()) +
                        " attention values for " +
                        std::to_string(facts.size()) + " facts");
  }
  if (mode == AttentionMode::SigmoidGru) {
    Val<Real> h = zero_state(g, cell.hidden());
    for (std::size_t t = 0; t < facts.size(); ++t) {
      Val<Real> gate = slot_values[t];
      h = gate * gru_step(g, cell, facts[t], h) +
          affine(gate, Real(-1), Real(1)) * h;
    }
    return h;
  }
  std::vector<Val<Real>> scores(slot_values.begin(), slot_values.end());
  auto weights = softmax(concat(std::span<const Val<Real>>(scores)));
  Val<Real> e = zero_state(g, g.value(facts[0]).numel());
  for (std::size_t t = 0; t < facts.size(); ++t) {
    e = e + slice(weights, t, 1) * facts[t];
  }
  return e;
}

// m_i = GRU(e_i, m_{i-1}); the same cell is reused on every pass.
template <class Real>
Val<Real> memory_update(Graph<Real>& g, GruParams<Real>& cell, Val<Real> e,
                        Val<Real> m_prev) {
  return gru_step(g, cell, e, m_prev);
}

struct GatePass {
  std::vector<double> scores;  // pre-activation score per slot
  std::vector<double> gates;   // sigmoid gates, or softmax weights
  std::size_t chosen = 0;      // argmax slot of gates
};

struct GateTrace {
  std::vector<GatePass> passes;
  std::size_t slots = 0;      // facts, plus one for the end-of-passes slot
  std::size_t stop_pass = 0;  // 1-based pass whose argmax hit that slot; 0 = ran out
};

template <class Real>
struct EpisodicResult {
  Val<Real> memory;
  GateTrace trace;
  // concatenated per-slot pre-activation scores, one vector per pass; the
  // gate supervision loss consumes these
  std::vector<Val<Real>> pass_scores;
};

// Iterates attention passes, updating the memory from each episode. The
// memory starts at the question vector. Iteration stops after max_passes, or
// as soon as the end-of-passes slot wins the argmax of a pass's gates. With
// max_passes == 0 the module is bypassed and the encoder's final state is
// handed to the answer module.
template <class Real>
EpisodicResult<Real> run_episodic(Graph<Real>& g, DmnModel<Real>& m,
                                  const FactSequence<Real>& input,
                                  Val<Real> q) {
  if (input.facts.empty()) throw ContractError("run_episodic: no facts");
  EpisodicResult<Real> out;
  const std::size_t n_facts = input.facts.size();
  out.trace.slots = n_facts + (m.cfg.use_sentinel ? 1 : 0);

  if (m.cfg.max_passes == 0) {
    out.memory = input.last_hidden;
    return out;
  }

  Val<Real> memory = q;
  for (std::size_t pass = 1; pass <= m.cfg.max_passes; ++pass) {
    auto wq = matmul(g.param(m.gate.bilinear), q);
    auto wm = matmul(g.param(m.gate.bilinear), memory);

    std::vector<Val<Real>> pres, gates;
    pres.reserve(out.trace.slots);
    for (std::size_t t = 0; t < n_facts; ++t) {
      auto s = gate_score_pre(g, m.gate, input.facts[t], memory, q, wq, wm);
      pres.push_back(s.pre);
      gates.push_back(s.gate);
    }
    if (m.cfg.use_sentinel) {
      auto s = gate_score_pre(g, m.gate, g.param(m.sentinel), memory, q, wq,
                              wm);
      pres.push_back(s.pre);
      gates.push_back(s.gate);
    }
    auto score_vec = concat(std::span<const Val<Real>>(pres));
    out.pass_scores.push_back(score_vec);

    Val<Real> e;
    GatePass row;
    row.scores.reserve(out.trace.slots);
    for (auto p : pres) row.scores.push_back(double(g.value(p).item()));
    if (m.cfg.attention == AttentionMode::SigmoidGru) {
      e = episode(g, AttentionMode::SigmoidGru,
                  std::span<const Val<Real>>(input.facts),
                  std::span<const Val<Real>>(gates), m.episode_gru);
      for (auto gv : gates) row.gates.push_back(double(g.value(gv).item()));
    } else {
      e = episode(g, AttentionMode::Softmax,
                  std::span<const Val<Real>>(input.facts),
                  std::span<const Val<Real>>(pres), m.episode_gru);
      auto weights = g.value(softmax(score_vec));
      row.gates.assign(weights.data.begin(), weights.data.end());
    }
    row.chosen = std::size_t(
        std::max_element(row.gates.begin(), row.gates.end()) -
        row.gates.begin());
    memory = memory_update(g, m.memory_gru, e, memory);
    out.trace.passes.push_back(std::move(row));

    if (m.cfg.use_sentinel && out.trace.passes.back().chosen == n_facts) {
      out.trace.stop_pass = pass;
      break;
    }
  }
  out.memory = memory;
  return out;
}

// ---------------------------------------------------------------------------
// Answer module.
// ---------------------------------------------------------------------------

namespace detail {

template <class Real>
Tensor<Real> one_hot(std::size_t n, std::size_t index) {
  auto t = Tensor<Real>::zeros({n});
  t[index] = Real(1);
  return t;
}

// One decoder step: a_t = GRU([y_{t-1}, q], a_{t-1}), logits = W_a a_t.
template <class Real>
std::pair<Val<Real>, Val<Real>> answer_step(Graph<Real>& g, DmnModel<Real>& m,
                                            Val<Real> y_prev, Val<Real> q,
                                            Val<Real> a_prev) {
  auto a = gru_step(g, m.answer_gru, concat<Real>({y_prev, q}), a_prev);
  auto logits = matmul(g.param(m.answer_w), a);
  return {a, logits};
}

}  // namespace detail

// Teacher-forced decoding: feeds the gold class one-hots and returns one
// logits vector per target step.
template <class Real>
std::vector<Val<Real>> answer_sequence_teacher_forced(
    Graph<Real>& g, DmnModel<Real>& m, Val<Real> memory, Val<Real> q,
    std::span<const std::size_t> gold_classes) {
  const std::size_t k = m.answer_classes.size();
  std::vector<Val<Real>> logits;
  Val<Real> a = memory;                  // a_0 is the final memory
  Val<Real> y = zero_state(g, k);        // y_0 is the zero vector
  for (std::size_t gold : gold_classes) {
    if (gold >= k) {
      throw IndexError("answer target class " + std::to_string(gold) +
                       " out of range for " + std::to_string(k) + " classes");
    }
    auto [a_next, step_logits] = detail::answer_step(g, m, y, q, a);
    a = a_next;
    logits.push_back(step_logits);
    y = g.input(detail::one_hot<Real>(k, gold));
  }
  return logits;
}

// Greedy decoding until the end-of-sequence class or max_answer_len. The
// end marker itself is not part of the returned answer. Single-class mode
// decodes exactly one step.
template <class Real>
std::vector<std::size_t> answer_sequence_decode(Graph<Real>& g,
                                                DmnModel<Real>& m,
                                                Val<Real> memory, Val<Real> q) {
  const std::size_t k = m.answer_classes.size();
  const std::size_t eos = m.eos_class();
  const std::size_t steps = m.cfg.answer_mode == AnswerMode::SingleClass
                                ? 1
                                : m.cfg.max_answer_len;
  std::vector<std::size_t> out;
  Val<Real> a = memory;
  Val<Real> y = zero_state(g, k);
  for (std::size_t t = 0; t < steps; ++t) {
    auto [a_next, logits] = detail::answer_step(g, m, y, q, a);
    a = a_next;
    const Tensor<Real>& l = g.value(logits);
    const std::size_t pick = std::size_t(
        std::max_element(l.data.begin(), l.data.end()) - l.data.begin());
    if (m.cfg.answer_mode != AnswerMode::SingleClass && pick == eos) break;
    out.push_back(pick);
    y = g.input(detail::one_hot<Real>(k, pick));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-token answers (sequence tagging): the episode for word t is the
// episode GRU state at t, and a single softmax head labels each word from
// its final memory. First-pass gates do not depend on the word position, so
// they are computed once and shared; later passes see per-word memories.
// ---------------------------------------------------------------------------
template <class Real>
struct PerTokenResult {
  std::vector<Val<Real>> logits;  // one per input word
  GatePass first_pass;            // the shared first-pass gates
};

template <class Real>
PerTokenResult<Real> answer_per_token(Graph<Real>& g, DmnModel<Real>& m,
                                      const FactSequence<Real>& input,
                                      Val<Real> q) {
  if (!input.word_level) {
    throw ContractError(
        "answer_per_token: needs word-level facts, not sentence facts");
  }
  if (m.cfg.max_passes == 0) {
    throw ContractError("answer_per_token: needs at least one pass");
  }
  const std::size_t n_words = input.facts.size();

  auto score_pass = [&](Val<Real> memory) {
    auto wq = matmul(g.param(m.gate.bilinear), q);
    auto wm = matmul(g.param(m.gate.bilinear), memory);
    std::vector<Val<Real>> gates;
    std::vector<double> gate_values;
    for (std::size_t t = 0; t < n_words; ++t) {
      auto s = gate_score_pre(g, m.gate, input.facts[t], memory, q, wq, wm);
      gates.push_back(s.gate);
      gate_values.push_back(double(g.value(s.gate).item()));
    }
    if (m.cfg.use_sentinel) {
      auto s =
          gate_score_pre(g, m.gate, g.param(m.sentinel), memory, q, wq, wm);
      gates.push_back(s.gate);
      gate_values.push_back(double(g.value(s.gate).item()));
    }
    return std::pair(std::move(gates), std::move(gate_values));
  };

  // gated episode states over the whole input, one list per pass 1
  auto [first_gates, first_values] = score_pass(q);
  std::vector<Val<Real>> h_first;
  {
    Val<Real> h = zero_state(g, m.cfg.n_hidden);
    for (std::size_t t = 0; t < n_words; ++t) {
      h = first_gates[t] * gru_step(g, m.episode_gru, input.facts[t], h) +
          affine(first_gates[t], Real(-1), Real(1)) * h;
      h_first.push_back(h);
    }
  }

  PerTokenResult<Real> out;
  out.first_pass.gates = first_values;
  out.first_pass.chosen = std::size_t(
      std::max_element(first_values.begin(), first_values.end()) -
      first_values.begin());

  for (std::size_t w = 0; w < n_words; ++w) {
    Val<Real> memory = memory_update(g, m.memory_gru, h_first[w], q);
    for (std::size_t pass = 2; pass <= m.cfg.max_passes; ++pass) {
      auto [gates, values] = score_pass(memory);
      Val<Real> h = zero_state(g, m.cfg.n_hidden);
      Val<Real> e = h;
      for (std::size_t t = 0; t <= w; ++t) {
        h = gates[t] * gru_step(g, m.episode_gru, input.facts[t], h) +
            affine(gates[t], Real(-1), Real(1)) * h;
        e = h;
      }
      memory = memory_update(g, m.memory_gru, e, memory);
    }
    out.logits.push_back(matmul(g.param(m.answer_w), memory));
  }
  return out;
}

}  // namespace dmn
