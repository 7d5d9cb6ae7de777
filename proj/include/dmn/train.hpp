#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmn/model.hpp"

namespace dmn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2 = 1e-5;                // added to gradients as l2 * theta
  double dropout = 0.1;            // embedding dropout rate
  double alpha = 1.0;              // gate loss weight (active from the start)
  double beta = 1.0;               // answer loss weight (active after the switch)
  std::size_t switch_epoch = 5;    // first epoch with the answer loss enabled
  std::size_t epochs = 100;
  std::size_t patience = 10;       // early-stopping patience; 0 disables
  std::uint64_t seed = 1;

  void validate() const {
    if (learning_rate <= 0) throw ConfigError("learning rate must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
      throw ConfigError("adam moment decays must lie in [0, 1)");
    }
    if (epsilon <= 0) throw ConfigError("adam epsilon must be positive");
    if (l2 < 0) throw ConfigError("l2 coefficient must be nonnegative");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
    if (alpha < 0 || beta < 0) throw ConfigError("loss weights must be nonnegative");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
  }
};

// Loss-weight schedule: gates only at first, both objectives from the switch
// epoch on.
inline std::pair<double, double> schedule(std::size_t epoch,
                                          const TrainConfig& cfg) {
  if (epoch < cfg.switch_epoch) return {cfg.alpha, 0.0};
  return {cfg.alpha, cfg.beta};
}

// ---------------------------------------------------------------------------
// Joint objective: weighted sum of the per-pass gate cross-entropy (over the
// pre-activation scores of every slot) and the per-step answer cross-entropy.
// Passes beyond the supervision list are simply unsupervised.
// ---------------------------------------------------------------------------
template <class Real>
Val<Real> joint_loss(Graph<Real>& g, std::span<const Val<Real>> pass_scores,
                     std::span<const std::size_t> gate_targets,
                     std::span<const Val<Real>> answer_logits,
                     std::span<const std::size_t> answer_targets,
                     Real alpha, Real beta) {
  std::optional<Val<Real>> gate_term;
  const std::size_t supervised =
      std::min(pass_scores.size(), gate_targets.size());
  for (std::size_t i = 0; i < supervised; ++i) {
    auto ce = cross_entropy(pass_scores[i], gate_targets[i]);
    gate_term = gate_term ? *gate_term + ce : ce;
  }
  std::optional<Val<Real>> answer_term;
  if (answer_logits.size() != answer_targets.size()) {
    throw ContractError("joint_loss: " + std::to_string(answer_logits.size()) +
                        " answer logits for " +
                        std::to_string(answer_targets.size()) + " targets");
  }
  for (std::size_t t = 0; t < answer_logits.size(); ++t) {
    auto ce = cross_entropy(answer_logits[t], answer_targets[t]);
    answer_term = answer_term ? *answer_term + ce : ce;
  }
  std::optional<Val<Real>> total;
  if (gate_term) total = affine(*gate_term, alpha, Real(0));
  if (answer_term) {
    auto weighted = affine(*answer_term, beta, Real(0));
    total = total ? *total + weighted : weighted;
  }
  return total ? *total : g.input(Tensor<Real>::scalar(0));
}

// ---------------------------------------------------------------------------
// Adam with bias correction; L2 enters through the gradient.
// ---------------------------------------------------------------------------
template <class Real>
struct AdamState {
  std::vector<Tensor<Real>> first;   // one per parameter
  std::vector<Tensor<Real>> second;
  std::size_t step = 0;
};

template <class Real>
void adam_init(AdamState<Real>& state,
               const std::vector<Parameter<Real>*>& params) {
  state.first.clear();
  state.second.clear();
  for (auto* p : params) {
    state.first.push_back(Tensor<Real>::zeros(p->value.shape));
    state.second.push_back(Tensor<Real>::zeros(p->value.shape));
  }
  state.step = 0;
}

template <class Real>
void adam_step(AdamState<Real>& state,
               const std::vector<Parameter<Real>*>& params,
               const TrainConfig& cfg) {
  if (state.first.size() != params.size()) {
    throw ContractError("adam_step: state tracks " +
                        std::to_string(state.first.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const Real b1 = Real(cfg.beta1), b2 = Real(cfg.beta2);
  const Real corr1 = Real(1) - Real(std::pow(cfg.beta1, double(state.step)));
  const Real corr2 = Real(1) - Real(std::pow(cfg.beta2, double(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<Real>& p = *params[i];
    if (!p.trainable) continue;
    if (!p.value.same_shape(state.first[i])) {
      throw ShapeError("adam_step: parameter '" + p.name +
                       "' changed shape to " + p.value.shape_string());
    }
    Tensor<Real>& m = state.first[i];
    Tensor<Real>& v = state.second[i];
    for (std::size_t j = 0; j < p.value.numel(); ++j) {
      Real grad = p.grad[j];
      if (p.decay && cfg.l2 > 0) grad += Real(cfg.l2) * p.value[j];
      m[j] = b1 * m[j] + (Real(1) - b1) * grad;
      v[j] = b2 * v[j] + (Real(1) - b2) * grad * grad;
      const Real mhat = m[j] / corr1;
      const Real vhat = v[j] / corr2;
      p.value[j] -= Real(cfg.learning_rate) * mhat /
                    (std::sqrt(vhat) + Real(cfg.epsilon));
    }
  }
}

// ---------------------------------------------------------------------------
// Story encoding: vocab ids, answer class targets and gate targets.
// ---------------------------------------------------------------------------
struct EncodedStory {
  std::vector<std::size_t> tokens;
  std::optional<std::vector<std::size_t>> sentence_ends;  // absent: word-level
  std::vector<std::size_t> question;
  std::vector<std::size_t> answer_classes;  // gold class sequence
  std::vector<std::size_t> gate_targets;    // slot ordinal per supervised pass
};

template <class Real>
EncodedStory encode_story(const Story& story, const DmnModel<Real>& model) {
  EncodedStory out;
  const bool word_level = model.cfg.answer_mode == AnswerMode::PerToken;
  if (word_level) {
    for (const auto& f : story.facts) {
      for (const auto& t : f.tokens) out.tokens.push_back(model.vocab.id(t));
    }
  } else {
    std::vector<std::size_t> ends;
    for (const auto& f : story.facts) {
      for (const auto& t : f.tokens) out.tokens.push_back(model.vocab.id(t));
      ends.push_back(out.tokens.size());
    }
    out.sentence_ends = std::move(ends);
  }
  for (const auto& t : story.question) {
    out.question.push_back(model.vocab.id(t));
  }

  for (const auto& t : story.answer) {
    const std::size_t cls = model.class_of(model.vocab.id(t));
    if (cls == DmnModel<Real>::kNoClass) {
      throw IndexError("answer token '" + t +
                       "' is not covered by the model's answer classes");
    }
    out.answer_classes.push_back(cls);
  }
  if (model.cfg.answer_mode == AnswerMode::Sequence) {
    out.answer_classes.push_back(model.eos_class());
  }
  if (word_level && out.answer_classes.size() != out.tokens.size()) {
    throw ContractError("per-token story needs one label per word: " +
                        std::to_string(out.tokens.size()) + " words vs " +
                        std::to_string(out.answer_classes.size()) + " labels");
  }

  if (!story.supporting.empty() && !word_level) {
    for (int line : story.supporting) {
      out.gate_targets.push_back(story.fact_ordinal(line));
    }
    if (model.cfg.use_sentinel) {
      // the pass after the last supported one should pick the stop slot
      out.gate_targets.push_back(story.facts.size());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward pass wrappers used by training and evaluation.
// ---------------------------------------------------------------------------
namespace detail {

template <class Real>
struct ForwardLoss {
  Val<Real> loss;
  GateTrace trace;
};

template <class Real>
ForwardLoss<Real> story_loss(Graph<Real>& g, DmnModel<Real>& model,
                             const EncodedStory& ex, Real alpha, Real beta,
                             const ForwardOptions<Real>& opts) {
  auto facts = encode_input(g, model, std::span<const std::size_t>(ex.tokens),
                            ex.sentence_ends, opts);
  auto q = encode_question(g, model, std::span<const std::size_t>(ex.question),
                           opts);
  if (model.cfg.answer_mode == AnswerMode::PerToken) {
    auto res = answer_per_token(g, model, facts, q);
    std::vector<std::size_t> targets = ex.answer_classes;
    auto loss = joint_loss(g, std::span<const Val<Real>>(),
                           std::span<const std::size_t>(),
                           std::span<const Val<Real>>(res.logits),
                           std::span<const std::size_t>(targets), alpha, beta);
    GateTrace trace;
    trace.slots = res.logits.size();
    trace.passes.push_back(res.first_pass);
    return {loss, std::move(trace)};
  }
  auto epi = run_episodic(g, model, facts, q);
  std::vector<Val<Real>> logits;
  if (beta > 0) {
    logits = answer_sequence_teacher_forced(
        g, model, epi.memory, q,
        std::span<const std::size_t>(ex.answer_classes));
  }
  std::span<const std::size_t> answer_targets =
      beta > 0 ? std::span<const std::size_t>(ex.answer_classes)
               : std::span<const std::size_t>();
  auto loss =
      joint_loss(g, std::span<const Val<Real>>(epi.pass_scores),
                 std::span<const std::size_t>(ex.gate_targets),
                 std::span<const Val<Real>>(logits), answer_targets,
                 alpha, beta);
  return {loss, std::move(epi.trace)};
}

}  // namespace detail

// Decoded answer tokens (and the attention trace) for one story.
template <class Real>
struct StoryPrediction {
  std::vector<std::string> answer;
  GateTrace trace;
};

template <class Real>
StoryPrediction<Real> predict(DmnModel<Real>& model, const Story& story) {
  const EncodedStory ex = encode_story(story, model);
  Graph<Real> g;
  ForwardOptions<Real> opts;  // evaluation mode
  auto facts = encode_input(g, model, std::span<const std::size_t>(ex.tokens),
                            ex.sentence_ends, opts);
  auto q = encode_question(g, model, std::span<const std::size_t>(ex.question),
                           opts);
  StoryPrediction<Real> out;
  if (model.cfg.answer_mode == AnswerMode::PerToken) {
    auto res = answer_per_token(g, model, facts, q);
    for (auto logit : res.logits) {
      const auto& l = g.value(logit);
      const std::size_t cls = std::size_t(
          std::max_element(l.data.begin(), l.data.end()) - l.data.begin());
      out.answer.push_back(model.vocab.token(model.answer_classes[cls]));
    }
    out.trace.slots = facts.facts.size();
    out.trace.passes.push_back(res.first_pass);
    return out;
  }
  auto epi = run_episodic(g, model, facts, q);
  for (std::size_t cls : answer_sequence_decode(g, model, epi.memory, q)) {
    out.answer.push_back(model.vocab.token(model.answer_classes[cls]));
  }
  out.trace = std::move(epi.trace);
  return out;
}

struct EvalResult {
  double answer_accuracy = 0.0;
  double gate_accuracy = 0.0;
  bool has_gate = false;     // any supervised pass was scored
  std::size_t stories = 0;
};

// Answer accuracy is exact match of the decoded sequence (token accuracy in
// per-token mode). Gate accuracy is the fraction of supervised executed
// passes whose argmax slot hits the target.
template <class Real>
EvalResult evaluate(DmnModel<Real>& model, const std::vector<Story>& stories) {
  if (stories.empty()) throw ContractError("evaluate: empty story set");
  EvalResult res;
  res.stories = stories.size();
  double answer_hits = 0, answer_total = 0;
  double gate_hits = 0, gate_total = 0;
  const bool per_token = model.cfg.answer_mode == AnswerMode::PerToken;
  for (const auto& story : stories) {
    auto pred = predict(model, story);
    if (per_token) {
      for (std::size_t i = 0; i < story.answer.size(); ++i) {
        answer_total += 1;
        if (i < pred.answer.size() && pred.answer[i] == story.answer[i]) {
          answer_hits += 1;
        }
      }
    } else {
      answer_total += 1;
      if (pred.answer == story.answer) answer_hits += 1;
      if (!story.supporting.empty()) {
        const EncodedStory ex = encode_story(story, model);
        const std::size_t supervised =
            std::min(pred.trace.passes.size(), ex.gate_targets.size());
        for (std::size_t i = 0; i < supervised; ++i) {
          gate_total += 1;
          if (pred.trace.passes[i].chosen == ex.gate_targets[i]) {
            gate_hits += 1;
          }
        }
      }
    }
  }
  res.answer_accuracy = answer_total > 0 ? answer_hits / answer_total : 0.0;
  res.has_gate = gate_total > 0;
  res.gate_accuracy = res.has_gate ? gate_hits / gate_total : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Training loop: per-example updates, seeded shuffling, early stopping on
// dev answer accuracy, best-checkpoint restore.
// ---------------------------------------------------------------------------
struct EpochMetrics {
  std::size_t epoch = 0;
  double alpha = 0, beta = 0;
  double train_loss = 0;
  double dev_loss = 0;
  double dev_answer_accuracy = 0;
  double dev_gate_accuracy = 0;
  bool has_gate = false;

  bool operator==(const EpochMetrics&) const = default;
};

struct Metrics {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0;
};

template <class Real>
Metrics train(DmnModel<Real>& model, const std::vector<Story>& train_stories,
              const std::vector<Story>& dev_stories, const TrainConfig& cfg) {
  cfg.validate();
  if (train_stories.empty()) throw ConfigError("train: empty corpus");

  Rng rng(cfg.seed);
  std::vector<Story> train_set = train_stories;
  std::vector<Story> dev_set = dev_stories;
  if (dev_set.empty()) {
    // hold out a tenth of the training data
    std::shuffle(train_set.begin(), train_set.end(), rng);
    const std::size_t n_dev = std::max<std::size_t>(1, train_set.size() / 10);
    dev_set.assign(train_set.end() - n_dev, train_set.end());
    train_set.resize(train_set.size() - n_dev);
    if (train_set.empty()) throw ConfigError("train: corpus too small to split");
  }

  std::vector<EncodedStory> encoded;
  encoded.reserve(train_set.size());
  for (const auto& s : train_set) encoded.push_back(encode_story(s, model));
  std::vector<EncodedStory> dev_encoded;
  for (const auto& s : dev_set) dev_encoded.push_back(encode_story(s, model));

  auto params = model.parameters();
  AdamState<Real> adam;
  adam_init(adam, params);

  Metrics metrics;
  std::vector<Tensor<Real>> best_values;
  double best_accuracy = -1.0;
  std::size_t best_epoch = 0;
  std::size_t stale = 0;

  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto [alpha, beta] = schedule(epoch, cfg);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    for (std::size_t idx : order) {
      for (auto* p : params) p->zero_grad();
      Graph<Real> g;
      ForwardOptions<Real> opts{true, Real(cfg.dropout), &rng};
      auto fwd = detail::story_loss(g, model, encoded[idx], Real(alpha),
                                    Real(beta), opts);
      loss_sum += double(g.value(fwd.loss).item());
      g.backward(fwd.loss);
      adam_step(adam, params, cfg);
    }

    // dev loss is always measured at the full loss weights so epochs stay
    // comparable across the schedule switch
    double dev_loss_sum = 0;
    for (const auto& ex : dev_encoded) {
      Graph<Real> g;
      ForwardOptions<Real> opts;
      auto fwd = detail::story_loss(g, model, ex, Real(cfg.alpha),
                                    Real(cfg.beta), opts);
      dev_loss_sum += double(g.value(fwd.loss).item());
    }
    auto dev_eval = evaluate(model, dev_set);

    EpochMetrics em;
    em.epoch = epoch;
    em.alpha = alpha;
    em.beta = beta;
    em.train_loss = loss_sum / double(encoded.size());
    em.dev_loss = dev_loss_sum / double(dev_encoded.size());
    em.dev_answer_accuracy = dev_eval.answer_accuracy;
    em.dev_gate_accuracy = dev_eval.gate_accuracy;
    em.has_gate = dev_eval.has_gate;
    metrics.history.push_back(em);

    if (dev_eval.answer_accuracy > best_accuracy) {
      best_accuracy = dev_eval.answer_accuracy;
      best_epoch = epoch;
      best_values.clear();
      for (auto* p : params) best_values.push_back(p->value);
      stale = 0;
    } else {
      ++stale;
      if (cfg.patience > 0 && stale >= cfg.patience &&
          epoch + 1 >= cfg.switch_epoch) {
        break;
      }
    }
  }

  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->value = best_values[i];
    }
  }
  metrics.best_epoch = best_epoch;
  metrics.best_dev_accuracy = std::max(best_accuracy, 0.0);
  return metrics;
}

}  // namespace dmn
