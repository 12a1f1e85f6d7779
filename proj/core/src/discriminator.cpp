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

#include "hredgan/discriminator.hpp"

#include <cmath>
#include <stdexcept>

#include "hredgan/optim.hpp"

namespace hredgan {

double sequence_score(const WordScoreSequence& words) {
  if (words.probs.empty()) return 0.0;
  // exp(log p) is not always p in floating point
  if (words.probs.size() == 1) return words.probs.front();
  double total = 0.0;
  for (double p : words.probs) total += std::log(p);
  return std::exp(total / static_cast<double>(words.probs.size()));
}

double accuracy(std::span<const WordScoreSequence> real,
                std::span<const WordScoreSequence> fake) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& seq : real) {
    for (double p : seq.probs) {
      correct += p > 0.5 ? 1 : 0;
      ++total;
    }
  }
  for (const auto& seq : fake) {
    for (double p : seq.probs) {
      correct += p < 0.5 ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("accuracy: no tokens");
  return static_cast<double>(correct) / static_cast<double>(total);
}

Discriminator::Discriminator(const ModelConfig& config,
                             std::shared_ptr<Parameter> embedding,
                             RandomStream& rng)
    : config_(config), embedding_(std::move(embedding)) {
  const std::size_t h = config_.hidden_dim;
  const std::size_t l = config_.disc_layers;
  rnn_ = StackedRnnParams("disc.rnn", config_.embed_dim, h, l,
                          Direction::kBidirectional, rng);
  init_w_ = Parameter("disc.init.w", xavier_init(h, 2 * l * h, rng));
  init_b_ = Parameter("disc.init.b", Tensor::matrix(1, 2 * l * h));
  out_w_ = Parameter("disc.output.w", xavier_init(2 * h, 1, rng));
  out_b_ = Parameter("disc.output.b", Tensor::matrix(1, 1));
}

std::vector<Parameter*> Discriminator::own_parameters() {
  std::vector<Parameter*> out;
  rnn_.collect(out);
  out.insert(out.end(), {&init_w_, &init_b_, &out_w_, &out_b_});
  return out;
}

std::vector<ad::Var> Discriminator::word_probs(ad::Tape& tape, ad::Var context,
                                               const TokenMatrix& tokens,
                                               const Tensor* mask) {
  if (tokens.cols == 0) throw std::invalid_argument("word_probs: empty sequence");
  const std::size_t h = config_.hidden_dim;
  ad::Var init = ad::tanh(matmul(context, tape.parameter(init_w_)) +
                          tape.parameter(init_b_));
  std::vector<ad::Var> h0;
  for (std::size_t k = 0; k < 2 * config_.disc_layers; ++k) {
    h0.push_back(ad::slice(init, k * h, h));
  }
  ad::Var table = tape.parameter(*embedding_);
  std::vector<ad::Var> inputs;
  std::vector<ad::Var> masks;
  for (std::size_t c = 0; c < tokens.cols; ++c) {
    inputs.push_back(ad::gather_rows(table, tokens.column(c)));
    if (mask != nullptr) {
      Tensor m = Tensor::matrix(tokens.rows, 1);
      for (std::size_t r = 0; r < tokens.rows; ++r) m[r] = mask->at(r, c);
      masks.push_back(tape.constant(std::move(m)));
    }
  }
  RnnResult run = run_rnn(tape, rnn_, inputs, h0, masks);
  ad::Var w = tape.parameter(out_w_);
  ad::Var b = tape.parameter(out_b_);
  std::vector<ad::Var> out;
  out.reserve(run.states.size());
  for (const ad::Var& s : run.states) {
    out.push_back(ad::clamp(ad::sigmoid(matmul(s, w) + b), kProbEpsilon,
                            1.0 - kProbEpsilon));
  }
  return out;
}

std::vector<WordScoreSequence> Discriminator::score(
    const Tensor& context, const TokenMatrix& tokens,
    std::span<const std::size_t> lengths) {
  ad::Tape tape;
  Tensor mask = Tensor::matrix(tokens.rows, tokens.cols);
  for (std::size_t r = 0; r < tokens.rows; ++r) {
    for (std::size_t c = 0; c < lengths[r] && c < tokens.cols; ++c) {
      mask.at(r, c) = 1.0;
    }
  }
  std::vector<ad::Var> probs =
      word_probs(tape, tape.constant(context), tokens, &mask);
  return to_sequences(probs, lengths);
}

std::vector<WordScoreSequence> to_sequences(std::span<const ad::Var> probs,
                                            std::span<const std::size_t> lengths) {
  std::vector<WordScoreSequence> out(lengths.size());
  for (std::size_t r = 0; r < lengths.size(); ++r) {
    for (std::size_t j = 0; j < lengths[r] && j < probs.size(); ++j) {
      out[r].probs.push_back(probs[j].value()[r]);
    }
  }
  return out;
}

}  // namespace hredgan
