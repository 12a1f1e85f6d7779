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
#include <span>
#include <vector>

#include "hredgan/autodiff.hpp"
#include "hredgan/config.hpp"
#include "hredgan/corpus.hpp"
#include "hredgan/recurrent.hpp"

namespace hredgan {

/// Word probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon].
inline constexpr double kProbEpsilon = 1e-12;

/// Per-token probabilities that each token of one sequence is ground truth.
struct WordScoreSequence {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
};

/// Geometric mean of the word probabilities, computed in log space.
double sequence_score(const WordScoreSequence& words);

/// Token-pooled accuracy at threshold 0.5: real tokens count as correct when
/// p > 0.5, fake tokens when p < 0.5; p == 0.5 is never correct.
double accuracy(std::span<const WordScoreSequence> real,
                std::span<const WordScoreSequence> fake);

/// Word-level bidirectional GRU discriminator. Shares the word embedding
/// with the generator and starts from a projection of the generator's
/// context vector.
class Discriminator {
 public:
  Discriminator(const ModelConfig& config, std::shared_ptr<Parameter> embedding,
                RandomStream& rng);

  std::shared_ptr<Parameter> embedding() const { return embedding_; }
  /// Parameters owned by the discriminator alone, in checkpoint order.
  std::vector<Parameter*> own_parameters();

  /// One rows x 1 probability per column of `tokens`.
  std::vector<ad::Var> word_probs(ad::Tape& tape, ad::Var context,
                                  const TokenMatrix& tokens,
                                  const Tensor* mask = nullptr);

  /// Scores one row of `tokens` per row of `context`, keeping only the
  /// first lengths[r] probabilities of row r.
  std::vector<WordScoreSequence> score(const Tensor& context,
                                       const TokenMatrix& tokens,
                                       std::span<const std::size_t> lengths);

 private:
  ModelConfig config_;
  std::shared_ptr<Parameter> embedding_;
  StackedRnnParams rnn_;
  Parameter init_w_;
  Parameter init_b_;
  Parameter out_w_;
  Parameter out_b_;
};

/// Splits per-step probabilities into per-row sequences using `lengths`.
std::vector<WordScoreSequence> to_sequences(std::span<const ad::Var> probs,
                                            std::span<const std::size_t> lengths);

}  // namespace hredgan
