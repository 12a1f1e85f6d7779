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

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hredgan/autodiff.hpp"
#include "hredgan/config.hpp"
#include "hredgan/corpus.hpp"
#include "hredgan/recurrent.hpp"
#include "hredgan/tensor.hpp"

namespace hredgan {

/// Gaussian noise fed to the decoder input. Training uses alpha = 1;
/// inference raises alpha to widen exploration.
struct NoiseSpec {
  NoiseLevel level = NoiseLevel::kWord;
  std::size_t dim = 0;
  double alpha = 1.0;
};

/// Draws `steps` noise matrices of shape rows x dim with covariance
/// alpha * I. Utterance level repeats one draw per row across all steps;
/// word level draws per step; none returns zeros.
std::vector<Tensor> sample_noise(const NoiseSpec& spec, std::size_t steps,
                                 std::size_t rows, RandomStream& rng);

/// Dialogue history summary that outlives a tape: the context RNN state per
/// layer plus the attention memory of the most recent utterance.
struct DialogueState {
  std::size_t rows = 0;
  std::vector<Tensor> context;  // per context-RNN layer, rows x H
  std::vector<Tensor> memory;   // per token of the latest utterance, rows x 2H
  Tensor memory_bias;           // rows x M additive padding bias, may be empty
  Tensor memory_summary;        // rows x 2H terminal attention-encoder state
  std::vector<std::vector<TokenId>> history;  // committed utterances

  const Tensor& context_vector() const { return context.back(); }
  bool has_memory() const { return !memory.empty(); }
  /// Row 0 repeated `rows` times (history is shared).
  DialogueState replicate(std::size_t rows) const;
};

/// DialogueState recorded on a tape, so gradients flow across turns.
struct TapeState {
  std::vector<ad::Var> context;
  std::vector<ad::Var> memory;
  std::optional<ad::Var> memory_bias;
  std::optional<ad::Var> memory_summary;
  std::optional<AttentionMemory> attention;

  ad::Var context_vector() const { return context.back(); }
};

struct EncodedUtterance {
  ad::Var encoding;                    // rows x 2H, final eRNN state
  std::vector<ad::Var> memory;         // per token, rows x 2H aRNN states
  std::optional<ad::Var> memory_bias;  // present when rows are padded
  std::optional<ad::Var> summary;      // rows x 2H aRNN terminal state
};

struct DecoderStep {
  ad::Var logits;                // rows x |V|
  std::vector<ad::Var> hidden;   // per decoder layer
};

struct Decoded {
  std::vector<TokenId> tokens;  // EOS excluded
  double log_prob = 0.0;        // summed over emitted steps, EOS included
  std::size_t steps = 0;        // emitted steps, EOS included
  bool ended = false;           // stopped on EOS rather than max_len
};

/// Hierarchical encoder-decoder with an attention encoder and noise-fed
/// decoder:
///   eRNN (bidirectional) encodes each utterance to a fixed vector,
///   cRNN (unidirectional) folds those vectors into the dialogue context,
///   aRNN (bidirectional) produces per-token attention memory,
///   dRNN (unidirectional) consumes [E(prev) | attention | noise | context].
class Generator {
 public:
  Generator(const ModelConfig& config, RandomStream& rng);

  const ModelConfig& config() const { return config_; }
  std::shared_ptr<Parameter> embedding() const { return embedding_; }

  /// Every generator parameter in checkpoint order.
  std::vector<Parameter*> parameters();
  /// Parameters the discriminator reaches through the context vector.
  std::vector<Parameter*> shared_parameters();

  std::size_t decoder_input_dim() const;
  std::size_t context_dim() const { return config_.hidden_dim; }

  TapeState initial_state(ad::Tape& tape, std::size_t rows) const;
  TapeState bind(ad::Tape& tape, const DialogueState& state);
  static DialogueState snapshot(const TapeState& state, std::size_t rows);
  DialogueState zero_state(std::size_t rows) const;

  EncodedUtterance encode_utterance(ad::Tape& tape, const TokenMatrix& ids,
                                    const Tensor* mask = nullptr);
  TapeState update_context(ad::Tape& tape, const TapeState& state,
                           const EncodedUtterance& encoded);

  /// Decoder start state: tanh projection of [context | attention summary].
  std::vector<ad::Var> decoder_init(ad::Tape& tape, const TapeState& state);
  DecoderStep decoder_step(ad::Tape& tape, std::span<const std::size_t> prev,
                           std::span<const ad::Var> hidden,
                           const TapeState& state, ad::Var noise);

  /// Teacher-forced log-probability rows, one rows x |V| per step of
  /// `truth` (EOS included). The first input is EOS.
  std::vector<ad::Var> teacher_forced_turn(ad::Tape& tape,
                                           const TapeState& state,
                                           const TokenMatrix& truth,
                                           std::span<const Tensor> noise);

  /// Autoregressive argmax per row from an EOS start token.
  std::vector<Decoded> greedy_decode(const DialogueState& state,
                                     const NoiseSpec& noise,
                                     std::size_t max_len, RandomStream& rng);

  /// Single-row convenience: encode `utterance` (EOS appended) and fold it
  /// into `state`.
  DialogueState observe(const DialogueState& state,
                        std::span<const TokenId> utterance);

 private:
  ModelConfig config_;
  std::shared_ptr<Parameter> embedding_;
  StackedRnnParams encoder_;
  StackedRnnParams attention_encoder_;
  StackedRnnParams context_rnn_;
  StackedRnnParams decoder_;
  AttentionParams attention_;
  Parameter init_w_;
  Parameter init_b_;
  Parameter out_w_;
  Parameter out_b_;

  std::vector<ad::Var> embed_columns(ad::Tape& tape, const TokenMatrix& ids);
};

/// Samples one token per row and step from teacher-forced log-probabilities.
TokenMatrix sample_fake_turn(std::span<const ad::Var> log_probs,
                             RandomStream& rng);

/// Value-level per-step distributions for one turn.
struct TurnDistribution {
  std::vector<Tensor> log_probs;  // rows x |V| per step

  std::size_t steps() const { return log_probs.size(); }
  static TurnDistribution from(std::span<const ad::Var> log_probs);
};

}  // namespace hredgan
