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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hredgan/config.hpp"
#include "hredgan/corpus.hpp"
#include "hredgan/generator.hpp"

namespace hredgan {

class Model;

struct Candidate {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;  // per emitted step
};

struct RankedCandidate {
  std::vector<TokenId> tokens;
  double d_score = 0.0;   // geometric-mean discriminator probability
  double log_prob = 0.0;  // length-normalized
  std::size_t rank = 0;
};

/// L greedy decodes, each under its own noise draw with covariance alpha*I.
std::vector<Candidate> generate_candidates(Model& model,
                                           const DialogueState& state,
                                           const InferenceConfig& config,
                                           RandomStream& rng);

/// Sort key for a ranking mode: d_score, or log_prob + log(d_score).
double ranking_key(const RankedCandidate& c, RankingMode mode);

/// Scores every candidate (tokens followed by EOS) with the discriminator
/// against the state's context and sorts best-first. Ties go to the longer
/// candidate, then to the lexicographically smaller token sequence. Empty
/// candidates score 0.
std::vector<RankedCandidate> rank_and_select(Model& model,
                                             const DialogueState& state,
                                             std::vector<Candidate> candidates,
                                             const InferenceConfig& config);

/// generate_candidates followed by rank_and_select.
std::vector<RankedCandidate> propose(Model& model, const DialogueState& state,
                                     const InferenceConfig& config,
                                     RandomStream& rng);

/// Folds a chosen response into the history.
DialogueState commit_utterance(Model& model, const DialogueState& state,
                               std::span<const TokenId> response);

struct Response {
  std::vector<RankedCandidate> candidates;
  DialogueState state;  // with `commit_rank` (default rank 0) committed
};

Response respond(Model& model, const DialogueState& state,
                 const InferenceConfig& config, RandomStream& rng,
                 std::size_t commit_rank = 0);

using CorpusMetric =
    std::function<double(std::span<const std::vector<TokenId>>,
                         std::span<const std::vector<TokenId>>)>;

struct CalibrationResult {
  double best_alpha = 1.0;
  std::vector<std::pair<double, double>> scores;  // (alpha, metric)
};

/// 1, 2, ..., 20.
std::vector<double> default_alpha_grid();

/// Evaluates `metric` (ROUGE-2 F1 by default) on rank-0 validation responses
/// at every alpha in `grid`; returns the best, ties to the smaller alpha.
CalibrationResult calibrate_alpha(Model& model, std::span<const Dialogue> valid,
                                  std::span<const double> grid,
                                  InferenceConfig base, std::uint64_t seed,
                                  CorpusMetric metric = {});

}  // namespace hredgan
