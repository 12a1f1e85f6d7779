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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hredgan/config.hpp"
#include "hredgan/corpus.hpp"

namespace hredgan {

class Model;

using Sentence = std::vector<TokenId>;

/// Corpus BLEU over 1- and 2-grams with uniform weights, clipped counts,
/// brevity penalty, and zero match counts floored at 1e-9.
double bleu2(std::span<const Sentence> candidates,
             std::span<const Sentence> references);

/// Per-pair bigram F1 (clipped overlap), macro-averaged. Pairs where either
/// side has fewer than two tokens score 0.
double rouge2_f1(std::span<const Sentence> candidates,
                 std::span<const Sentence> references);

/// Distinct n-grams over total n-grams, pooled across responses; n >= 1.
double distinct_n(std::span<const Sentence> responses, std::size_t n);

/// Mean generated length over mean ground-truth length.
double nasl(std::span<const Sentence> generated,
            std::span<const Sentence> ground_truth);

struct NllTotals {
  double nll = 0.0;        // summed negative log-likelihood
  std::size_t tokens = 0;  // response tokens, EOS included
};

struct PerplexityOptions {
  std::uint64_t seed = 0;
  bool noise = true;  // draw decoder noise at alpha = 1, as in training
  std::size_t batch_size = 32;
};

/// Teacher-forced NLL of every response turn (turns 2..N) given its history.
NllTotals teacher_forced_nll(Model& model, std::span<const Dialogue> dialogues,
                             const PerplexityOptions& options = {});

/// exp(total NLL / response token count).
double perplexity(Model& model, std::span<const Dialogue> dialogues,
                  const PerplexityOptions& options = {});

struct EvalReport {
  double perplexity = 0.0;
  double bleu2 = 0.0;
  double rouge2_f1 = 0.0;
  double distinct1 = 0.0;
  double distinct2 = 0.0;
  double nasl = 0.0;
  std::size_t dialogues = 0;
  std::size_t responses = 0;
  std::size_t tokens = 0;

  bool in_range() const;
  /// `metric,value` header plus one row per metric.
  std::string to_csv() const;
  /// Aligned columns: perplexity | BLEU-2 | ROUGE-2 | DISTINCT-1/2 | NASL.
  std::string to_table() const;
};

/// Teacher-forced perplexity plus rank-0 autoregressive responses for every
/// response turn, scored against the ground truth.
EvalReport evaluate(Model& model, std::span<const Dialogue> test,
                    const InferenceConfig& inference, std::uint64_t seed);

/// Ground-truth history up to each response and the rank-0 prediction for
/// it; shared by evaluate and alpha calibration.
struct Predictions {
  std::vector<Sentence> generated;
  std::vector<Sentence> references;
};
Predictions predict_responses(Model& model, std::span<const Dialogue> dialogues,
                              const InferenceConfig& inference,
                              std::uint64_t seed);

}  // namespace hredgan
