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

#include "hredgan/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hredgan/metrics.hpp"
#include "hredgan/model.hpp"

namespace hredgan {

std::vector<Candidate> generate_candidates(Model& model,
                                           const DialogueState& state,
                                           const InferenceConfig& config,
                                           RandomStream& rng) {
  config.validate();
  const ModelConfig& mc = model.config();
  NoiseSpec spec;
  spec.level = config.noise_override.value_or(mc.noise_level);
  spec.dim = mc.resolved_noise_dim();
  spec.alpha = config.alpha;
  std::vector<Decoded> decoded = model.generator().greedy_decode(
      state.replicate(config.samples), spec, config.max_len, rng);
  std::vector<Candidate> out;
  out.reserve(decoded.size());
  for (Decoded& d : decoded) {
    Candidate c;
    c.log_prob = d.steps > 0 ? d.log_prob / static_cast<double>(d.steps) : 0.0;
    c.tokens = std::move(d.tokens);
    out.push_back(std::move(c));
  }
  return out;
}

double ranking_key(const RankedCandidate& c, RankingMode mode) {
  if (mode == RankingMode::kDiscriminator) return c.d_score;
  if (c.d_score <= 0.0) return -std::numeric_limits<double>::infinity();
  return c.log_prob + std::log(c.d_score);
}

std::vector<RankedCandidate> rank_and_select(Model& model,
                                             const DialogueState& state,
                                             std::vector<Candidate> candidates,
                                             const InferenceConfig& config) {
  if (candidates.empty()) {
    throw std::invalid_argument("rank_and_select: no candidates");
  }
  std::vector<RankedCandidate> ranked(candidates.size());
  std::vector<std::size_t> scored;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ranked[i].tokens = std::move(candidates[i].tokens);
    ranked[i].log_prob = candidates[i].log_prob;
    if (!ranked[i].tokens.empty()) scored.push_back(i);
  }
  if (!scored.empty()) {
    std::vector<std::vector<TokenId>> rows;
    for (std::size_t i : scored) {
      rows.push_back(ranked[i].tokens);
      rows.back().push_back(Vocab::kEos);
    }
    TokenMatrix tokens;
    std::vector<std::size_t> lengths;
    Tensor mask;
    pad_turn(rows, tokens, lengths, mask);
    const Tensor& ctx = state.context_vector();
    Tensor context = Tensor::matrix(rows.size(), ctx.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy_n(ctx.data().data(), ctx.cols(),
                  context.data().data() + r * ctx.cols());
    }
    std::vector<WordScoreSequence> words =
        model.discriminator().score(context, tokens, lengths);
    for (std::size_t k = 0; k < scored.size(); ++k) {
      ranked[scored[k]].d_score = sequence_score(words[k]);
    }
  }
  const RankingMode mode = config.ranking;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [mode](const RankedCandidate& a, const RankedCandidate& b) {
                     const double ka = ranking_key(a, mode);
                     const double kb = ranking_key(b, mode);
                     if (ka != kb) return ka > kb;
                     if (a.tokens.size() != b.tokens.size()) {
                       return a.tokens.size() > b.tokens.size();
                     }
                     return a.tokens < b.tokens;
                   });
  for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].rank = i;
  return ranked;
}

std::vector<RankedCandidate> propose(Model& model, const DialogueState& state,
                                     const InferenceConfig& config,
                                     RandomStream& rng) {
  return rank_and_select(model, state,
                         generate_candidates(model, state, config, rng), config);
}

DialogueState commit_utterance(Model& model, const DialogueState& state,
                     std::span<const TokenId> response) {
  return model.generator().observe(state, response);
}

Response respond(Model& model, const DialogueState& state,
                 const InferenceConfig& config, RandomStream& rng,
                 std::size_t commit_rank) {
  Response out;
  out.candidates = propose(model, state, config, rng);
  if (commit_rank >= out.candidates.size()) {
    throw std::out_of_range("respond: rank " + std::to_string(commit_rank) +
                            " out of range");
  }
  out.state = commit_utterance(model, state, out.candidates[commit_rank].tokens);
  return out;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int a = 1; a <= 20; ++a) grid.push_back(a);
  return grid;
}

CalibrationResult calibrate_alpha(Model& model, std::span<const Dialogue> valid,
                                  std::span<const double> grid,
                                  InferenceConfig base, std::uint64_t seed,
                                  CorpusMetric metric) {
  if (grid.empty()) throw std::invalid_argument("calibrate_alpha: empty grid");
  if (valid.empty()) {
    throw std::invalid_argument("calibrate_alpha: empty validation set");
  }
  if (!metric) {
    metric = [](std::span<const std::vector<TokenId>> c,
                std::span<const std::vector<TokenId>> r) { return rouge2_f1(c, r); };
  }
  CalibrationResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (double alpha : grid) {
    base.alpha = alpha;
    Predictions p = predict_responses(model, valid, base, seed);
    const double score = metric(p.generated, p.references);
    result.scores.emplace_back(alpha, score);
    if (score > best || (score == best && alpha < result.best_alpha)) {
      best = score;
      result.best_alpha = alpha;
    }
  }
  return result;
}

}  // namespace hredgan
