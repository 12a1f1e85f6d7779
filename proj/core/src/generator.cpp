// Copyright 2026 The hredgan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "hredgan/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hredgan/optim.hpp"

namespace hredgan {
namespace {

constexpr double kPaddingBias = -1e9;

Tensor row_of(const Tensor& t, std::size_t rows) {
  Tensor out = Tensor::matrix(rows, t.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(t.data().data(), t.cols(), out.data().data() + r * t.cols());
  }
  return out;
}

}  // namespace

std::vector<Tensor> sample_noise(const NoiseSpec& spec, std::size_t steps,
                                 std::size_t rows, RandomStream& rng) {
  if (steps == 0) throw std::invalid_argument("sample_noise: steps must be >= 1");
  std::vector<Tensor> out(steps, Tensor::matrix(rows, spec.dim));
  if (spec.level == NoiseLevel::kNone || spec.dim == 0) return out;
  const double sd = std::sqrt(spec.alpha);
  if (spec.level == NoiseLevel::kUtterance) {
    Tensor draw = Tensor::matrix(rows, spec.dim);
    for (double& v : draw.data()) v = sd * rng.normal();
    for (Tensor& t : out) t = draw;
    return out;
  }
  for (Tensor& t : out) {
    for (double& v : t.data()) v = sd * rng.normal();
  }
  return out;
}

DialogueState DialogueState::replicate(std::size_t n) const {
  DialogueState out;
  out.rows = n;
  for (const Tensor& t : context) out.context.push_back(row_of(t, n));
  for (const Tensor& t : memory) out.memory.push_back(row_of(t, n));
  if (!memory_bias.empty()) out.memory_bias = row_of(memory_bias, n);
  if (!memory_summary.empty()) out.memory_summary = row_of(memory_summary, n);
  out.history = history;
  return out;
}

Generator::Generator(const ModelConfig& config, RandomStream& rng)
    : config_(config) {
  if (config_.vocab_size <= Vocab::kSpecials) {
    throw std::invalid_argument("generator: vocab_size must exceed the specials");
  }
  const std::size_t e = config_.embed_dim;
  const std::size_t h = config_.hidden_dim;
  const std::size_t l = config_.layers;
  embedding_ = std::make_shared<Parameter>(
      "embedding", xavier_init(config_.vocab_size, e, rng));
  encoder_ = StackedRnnParams("ernn", e, h, l, Direction::kBidirectional, rng);
  if (config_.use_attention) {
    attention_encoder_ =
        StackedRnnParams("arnn", e, h, l, Direction::kBidirectional, rng);
  }
  context_rnn_ =
      StackedRnnParams("crnn", encoder_.output_dim(), h, l, Direction::kForward, rng);
  decoder_ =
      StackedRnnParams("drnn", decoder_input_dim(), h, l, Direction::kForward, rng);
  if (config_.use_attention) {
    attention_ = AttentionParams("attention", h, attention_encoder_.output_dim(),
                                 config_.resolved_attention_dim(), rng);
  }
  const std::size_t init_in =
      h + (config_.use_attention ? attention_encoder_.output_dim() : 0);
  init_w_ = Parameter("decoder_init.w", xavier_init(init_in, l * h, rng));
  init_b_ = Parameter("decoder_init.b", Tensor::matrix(1, l * h));
  out_w_ = Parameter("output.w", xavier_init(h, config_.vocab_size, rng));
  out_b_ = Parameter("output.b", Tensor::matrix(1, config_.vocab_size));
}

std::size_t Generator::decoder_input_dim() const {
  const std::size_t h = config_.hidden_dim;
  return config_.embed_dim + (config_.use_attention ? 2 * h : 0) +
         config_.resolved_noise_dim() + h;
}

std::vector<Parameter*> Generator::parameters() {
  std::vector<Parameter*> out{embedding_.get()};
  encoder_.collect(out);
  if (config_.use_attention) attention_encoder_.collect(out);
  context_rnn_.collect(out);
  decoder_.collect(out);
  if (config_.use_attention) attention_.collect(out);
  out.insert(out.end(), {&init_w_, &init_b_, &out_w_, &out_b_});
  return out;
}

std::vector<Parameter*> Generator::shared_parameters() {
  std::vector<Parameter*> out{embedding_.get()};
  encoder_.collect(out);
  context_rnn_.collect(out);
  return out;
}

TapeState Generator::initial_state(ad::Tape& tape, std::size_t rows) const {
  TapeState s;
  for (std::size_t k = 0; k < config_.layers; ++k) {
    s.context.push_back(tape.constant(Tensor::matrix(rows, config_.hidden_dim)));
  }
  return s;
}

DialogueState Generator::zero_state(std::size_t rows) const {
  DialogueState s;
  s.rows = rows;
  for (std::size_t k = 0; k < config_.layers; ++k) {
    s.context.push_back(Tensor::matrix(rows, config_.hidden_dim));
  }
  return s;
}

TapeState Generator::bind(ad::Tape& tape, const DialogueState& state) {
  TapeState s;
  for (const Tensor& t : state.context) s.context.push_back(tape.constant(t));
  for (const Tensor& t : state.memory) s.memory.push_back(tape.constant(t));
  if (!state.memory_bias.empty()) s.memory_bias = tape.constant(state.memory_bias);
  if (!state.memory_summary.empty()) {
    s.memory_summary = tape.constant(state.memory_summary);
  }
  if (config_.use_attention && !s.memory.empty()) {
    s.attention = prepare_memory(tape, attention_, s.memory, s.memory_bias);
  }
  return s;
}

DialogueState Generator::snapshot(const TapeState& state, std::size_t rows) {
  DialogueState out;
  out.rows = rows;
  for (const ad::Var& v : state.context) out.context.push_back(v.value());
  for (const ad::Var& v : state.memory) out.memory.push_back(v.value());
  if (state.memory_bias) out.memory_bias = state.memory_bias->value();
  if (state.memory_summary) out.memory_summary = state.memory_summary->value();
  return out;
}

std::vector<ad::Var> Generator::embed_columns(ad::Tape& tape,
                                              const TokenMatrix& ids) {
  ad::Var table = tape.parameter(*embedding_);
  std::vector<ad::Var> out;
  out.reserve(ids.cols);
  for (std::size_t c = 0; c < ids.cols; ++c) {
    std::vector<std::size_t> col = ids.column(c);
    for (std::size_t id : col) {
      if (id >= config_.vocab_size) {
        throw std::out_of_range("token id " + std::to_string(id) +
                                " outside vocabulary of size " +
                                std::to_string(config_.vocab_size));
      }
    }
    out.push_back(ad::gather_rows(table, std::move(col)));
  }
  return out;
}

EncodedUtterance Generator::encode_utterance(ad::Tape& tape,
                                             const TokenMatrix& ids,
                                             const Tensor* mask) {
  if (ids.cols == 0 || ids.rows == 0) {
    throw std::invalid_argument("encode_utterance: empty utterance");
  }
  std::vector<ad::Var> inputs = embed_columns(tape, ids);
  std::vector<ad::Var> step_masks;
  bool padded = false;
  if (mask != nullptr) {
    for (double v : mask->data()) padded = padded || v == 0.0;
  }
  if (padded) {
    for (std::size_t c = 0; c < ids.cols; ++c) {
      Tensor m = Tensor::matrix(ids.rows, 1);
      for (std::size_t r = 0; r < ids.rows; ++r) m[r] = mask->at(r, c);
      step_masks.push_back(tape.constant(std::move(m)));
    }
  }
  EncodedUtterance out;
  out.encoding = run_rnn(tape, encoder_, inputs, {}, step_masks).final;
  if (config_.use_attention) {
    RnnResult mem = run_rnn(tape, attention_encoder_, inputs, {}, step_masks);
    out.memory = std::move(mem.states);
    out.summary = mem.final;
    if (padded) {
      Tensor bias = Tensor::matrix(ids.rows, ids.cols);
      for (std::size_t i = 0; i < bias.size(); ++i) {
        bias[i] = (*mask)[i] == 0.0 ? kPaddingBias : 0.0;
      }
      out.memory_bias = tape.constant(std::move(bias));
    }
  }
  return out;
}

TapeState Generator::update_context(ad::Tape& tape, const TapeState& state,
                                    const EncodedUtterance& encoded) {
  const ad::Var seq[] = {encoded.encoding};
  RnnResult step = run_rnn(tape, context_rnn_, seq, state.context);
  TapeState next;
  next.context = std::move(step.layer_finals);
  next.memory = encoded.memory;
  next.memory_bias = encoded.memory_bias;
  next.memory_summary = encoded.summary;
  if (config_.use_attention) {
    next.attention =
        prepare_memory(tape, attention_, next.memory, next.memory_bias);
  }
  return next;
}

std::vector<ad::Var> Generator::decoder_init(ad::Tape& tape,
                                             const TapeState& state) {
  ad::Var source = state.context_vector();
  if (config_.use_attention) {
    if (!state.memory_summary) {
      throw std::logic_error("decoder_init: state has no attention memory");
    }
    source = ad::concat({source, *state.memory_summary});
  }
  ad::Var all = ad::tanh(matmul(source, tape.parameter(init_w_)) +
                         tape.parameter(init_b_));
  std::vector<ad::Var> out;
  const std::size_t h = config_.hidden_dim;
  for (std::size_t k = 0; k < config_.layers; ++k) {
    out.push_back(config_.layers == 1 ? all : ad::slice(all, k * h, h));
  }
  return out;
}

DecoderStep Generator::decoder_step(ad::Tape& tape,
                                    std::span<const std::size_t> prev,
                                    std::span<const ad::Var> hidden,
                                    const TapeState& state, ad::Var noise) {
  for (std::size_t id : prev) {
    if (id >= config_.vocab_size) {
      throw std::out_of_range("decoder_step: token id " + std::to_string(id) +
                              " outside vocabulary of size " +
                              std::to_string(config_.vocab_size));
    }
  }
  std::vector<ad::Var> parts;
  parts.push_back(ad::gather_rows(tape.parameter(*embedding_),
                                  std::vector<std::size_t>(prev.begin(), prev.end())));
  if (config_.use_attention) {
    if (!state.attention) {
      throw std::logic_error("decoder_step: state has no attention memory");
    }
    parts.push_back(attend(tape, attention_, hidden.back(), *state.attention).context);
  }
  parts.push_back(noise);
  parts.push_back(state.context_vector());
  const ad::Var input[] = {ad::concat(parts)};
  RnnResult step = run_rnn(tape, decoder_, input, hidden);
  DecoderStep out;
  out.logits = matmul(step.final, tape.parameter(out_w_)) + tape.parameter(out_b_);
  out.hidden = std::move(step.layer_finals);
  return out;
}

std::vector<ad::Var> Generator::teacher_forced_turn(
    ad::Tape& tape, const TapeState& state, const TokenMatrix& truth,
    std::span<const Tensor> noise) {
  if (truth.cols == 0) {
    throw std::invalid_argument("teacher_forced_turn: empty ground truth");
  }
  if (noise.size() != truth.cols) {
    throw std::invalid_argument("teacher_forced_turn: need one noise draw per step");
  }
  std::vector<ad::Var> hidden = decoder_init(tape, state);
  std::vector<std::size_t> prev(truth.rows, Vocab::kEos);
  std::vector<ad::Var> out;
  out.reserve(truth.cols);
  for (std::size_t j = 0; j < truth.cols; ++j) {
    DecoderStep step =
        decoder_step(tape, prev, hidden, state, tape.constant(noise[j]));
    out.push_back(ad::log_softmax(step.logits));
    hidden = std::move(step.hidden);
    prev = truth.column(j);
  }
  return out;
}

std::vector<Decoded> Generator::greedy_decode(const DialogueState& state,
                                              const NoiseSpec& noise,
                                              std::size_t max_len,
                                              RandomStream& rng) {
  if (max_len == 0) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  const std::size_t rows = state.rows;
  ad::Tape tape;
  TapeState bound = bind(tape, state);
  std::vector<Tensor> z = sample_noise(noise, max_len, rows, rng);
  std::vector<ad::Var> hidden = decoder_init(tape, bound);
  std::vector<std::size_t> prev(rows, Vocab::kEos);
  std::vector<Decoded> out(rows);
  std::size_t live = rows;
  const std::size_t v = config_.vocab_size;
  for (std::size_t j = 0; j < max_len && live > 0; ++j) {
    DecoderStep step = decoder_step(tape, prev, hidden, bound, tape.constant(z[j]));
    ad::Var logp = ad::log_softmax(step.logits);
    const Tensor& lp = logp.value();
    for (std::size_t r = 0; r < rows; ++r) {
      Decoded& d = out[r];
      if (d.ended) continue;
      const double* row = lp.data().data() + r * v;
      // PAD is never a valid output
      std::size_t best = Vocab::kUnk;
      for (std::size_t c = Vocab::kUnk; c < v; ++c) {
        if (row[c] > row[best]) best = c;
      }
      d.log_prob += row[best];
      ++d.steps;
      if (best == Vocab::kEos) {
        d.ended = true;
        --live;
      } else {
        d.tokens.push_back(static_cast<TokenId>(best));
      }
      prev[r] = best;
    }
    hidden = std::move(step.hidden);
  }
  return out;
}

DialogueState Generator::observe(const DialogueState& state,
                                 std::span<const TokenId> utterance) {
  if (state.rows != 1) throw std::invalid_argument("observe: state must have one row");
  TokenMatrix ids;
  ids.rows = 1;
  ids.ids.assign(utterance.begin(), utterance.end());
  ids.ids.push_back(Vocab::kEos);
  ids.cols = ids.ids.size();
  ad::Tape tape;
  TapeState bound = bind(tape, state);
  TapeState next = update_context(tape, bound, encode_utterance(tape, ids));
  DialogueState out = snapshot(next, 1);
  out.history = state.history;
  out.history.emplace_back(utterance.begin(), utterance.end());
  return out;
}

TokenMatrix sample_fake_turn(std::span<const ad::Var> log_probs,
                             RandomStream& rng) {
  TokenMatrix out;
  if (log_probs.empty()) return out;
  out.rows = log_probs.front().value().rows();
  out.cols = log_probs.size();
  out.ids.assign(out.rows * out.cols, Vocab::kPad);
  std::vector<double> probs;
  for (std::size_t j = 0; j < out.cols; ++j) {
    const Tensor& lp = log_probs[j].value();
    const std::size_t v = lp.cols();
    probs.resize(v);
    for (std::size_t r = 0; r < out.rows; ++r) {
      for (std::size_t c = 0; c < v; ++c) probs[c] = std::exp(lp.at(r, c));
      out.at(r, j) = static_cast<TokenId>(rng.categorical(probs));
    }
  }
  return out;
}

TurnDistribution TurnDistribution::from(std::span<const ad::Var> log_probs) {
  TurnDistribution d;
  for (const ad::Var& v : log_probs) d.log_probs.push_back(v.value());
  return d;
}

}  // namespace hredgan
