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

#include "hredgan/recurrent.hpp"

#include <stdexcept>

#include "hredgan/optim.hpp"

namespace hredgan {

GruLayerParams::GruLayerParams(const std::string& name, std::size_t in,
                               std::size_t hidden, RandomStream& rng)
    : input_dim(in),
      hidden_dim(hidden),
      w_input(name + ".w_input", xavier_init(in, 3 * hidden, rng)),
      u_gates(name + ".u_gates", xavier_init(hidden, 2 * hidden, rng)),
      u_candidate(name + ".u_candidate", xavier_init(hidden, hidden, rng)),
      bias(name + ".bias", Tensor::matrix(1, 3 * hidden)) {}

void GruLayerParams::collect(std::vector<Parameter*>& out) {
  out.insert(out.end(), {&w_input, &u_gates, &u_candidate, &bias});
}

StackedRnnParams::StackedRnnParams(const std::string& name, std::size_t in,
                                   std::size_t hidden, std::size_t layers,
                                   Direction dir, RandomStream& rng)
    : direction(dir), input_dim(in), hidden_dim(hidden) {
  if (layers == 0 || hidden == 0 || in == 0) {
    throw std::invalid_argument(name + ": dims and layer count must be >= 1");
  }
  std::size_t layer_in = in;
  for (std::size_t k = 0; k < layers; ++k) {
    const std::string prefix = name + ".l" + std::to_string(k);
    forward.emplace_back(prefix + ".fwd", layer_in, hidden, rng);
    if (dir == Direction::kBidirectional) {
      backward.emplace_back(prefix + ".bwd", layer_in, hidden, rng);
    }
    layer_in = output_dim();
  }
}

void StackedRnnParams::collect(std::vector<Parameter*>& out) {
  for (std::size_t k = 0; k < forward.size(); ++k) {
    forward[k].collect(out);
    if (!backward.empty()) backward[k].collect(out);
  }
}

AttentionParams::AttentionParams(const std::string& name, std::size_t q,
                                 std::size_t m, std::size_t a,
                                 RandomStream& rng)
    : query_dim(q),
      memory_dim(m),
      align_dim(a),
      w_query(name + ".w_query", xavier_init(q, a, rng)),
      w_memory(name + ".w_memory", xavier_init(m, a, rng)),
      bias(name + ".bias", Tensor::matrix(1, a)),
      score(name + ".score", xavier_init(a, 1, rng)) {}

void AttentionParams::collect(std::vector<Parameter*>& out) {
  out.insert(out.end(), {&w_query, &w_memory, &bias, &score});
}

ad::Var gru_step(ad::Tape& tape, GruLayerParams& p, ad::Var input,
                 ad::Var h_prev) {
  const std::size_t h = p.hidden_dim;
  if (input.value().cols() != p.input_dim || h_prev.value().cols() != h ||
      input.value().rows() != h_prev.value().rows()) {
    throw std::invalid_argument(
        "gru_step: input " + shape_string(input.shape()) + " / state " +
        shape_string(h_prev.shape()) + " do not match layer (" +
        std::to_string(p.input_dim) + " -> " + std::to_string(h) + ")");
  }
  ad::Var xw = matmul(input, tape.parameter(p.w_input)) + tape.parameter(p.bias);
  ad::Var hu = matmul(h_prev, tape.parameter(p.u_gates));
  ad::Var z = ad::sigmoid(ad::slice(xw, 0, h) + ad::slice(hu, 0, h));
  ad::Var r = ad::sigmoid(ad::slice(xw, h, h) + ad::slice(hu, h, h));
  ad::Var n = ad::tanh(ad::slice(xw, 2 * h, h) +
                       matmul(r * h_prev, tape.parameter(p.u_candidate)));
  return z * h_prev + ad::one_minus(z) * n;
}

namespace {

ad::Var masked(ad::Var fresh, ad::Var previous, std::span<const ad::Var> mask,
               std::size_t t) {
  if (mask.empty()) return fresh;
  return mask[t] * fresh + ad::one_minus(mask[t]) * previous;
}

}  // namespace

RnnResult run_rnn(ad::Tape& tape, StackedRnnParams& params,
                  std::span<const ad::Var> sequence, std::span<const ad::Var> h0,
                  std::span<const ad::Var> mask) {
  if (sequence.empty()) throw std::invalid_argument("run_rnn: empty sequence");
  if (!mask.empty() && mask.size() != sequence.size()) {
    throw std::invalid_argument("run_rnn: mask length differs from sequence");
  }
  const std::size_t dirs = params.directions();
  const std::size_t layers = params.layers();
  if (!h0.empty() && h0.size() != layers * dirs) {
    throw std::invalid_argument("run_rnn: expected " +
                                std::to_string(layers * dirs) +
                                " initial states, got " +
                                std::to_string(h0.size()));
  }
  const std::size_t rows = sequence.front().value().rows();
  const std::size_t steps = sequence.size();

  auto initial = [&](std::size_t layer, std::size_t dir) {
    if (!h0.empty()) return h0[layer * dirs + dir];
    return tape.constant(Tensor::matrix(rows, params.hidden_dim));
  };

  RnnResult result;
  std::vector<ad::Var> layer_input(sequence.begin(), sequence.end());
  for (std::size_t k = 0; k < layers; ++k) {
    std::vector<ad::Var> fwd(steps);
    ad::Var h = initial(k, 0);
    for (std::size_t t = 0; t < steps; ++t) {
      h = masked(gru_step(tape, params.forward[k], layer_input[t], h), h, mask,
                 t);
      fwd[t] = h;
    }
    result.layer_finals.push_back(fwd.back());
    if (dirs == 1) {
      layer_input = std::move(fwd);
      continue;
    }
    std::vector<ad::Var> bwd(steps);
    h = initial(k, 1);
    for (std::size_t t = steps; t-- > 0;) {
      h = masked(gru_step(tape, params.backward[k], layer_input[t], h), h, mask,
                 t);
      bwd[t] = h;
    }
    result.layer_finals.push_back(bwd.front());
    for (std::size_t t = 0; t < steps; ++t) {
      layer_input[t] = ad::concat({fwd[t], bwd[t]});
    }
  }
  result.states = std::move(layer_input);
  if (dirs == 1) {
    result.final = result.states.back();
  } else {
    const std::size_t n = result.layer_finals.size();
    result.final =
        ad::concat({result.layer_finals[n - 2], result.layer_finals[n - 1]});
  }
  return result;
}

AttentionMemory prepare_memory(ad::Tape& tape, AttentionParams& params,
                               std::span<const ad::Var> memory,
                               std::optional<ad::Var> bias) {
  if (memory.empty()) throw std::invalid_argument("attend: empty memory");
  AttentionMemory out;
  out.values.assign(memory.begin(), memory.end());
  ad::Var w = tape.parameter(params.w_memory);
  for (const ad::Var& m : memory) out.keys.push_back(matmul(m, w));
  out.bias = bias;
  return out;
}

AttentionResult attend(ad::Tape& tape, AttentionParams& params, ad::Var query,
                       const AttentionMemory& memory) {
  if (memory.values.empty()) throw std::invalid_argument("attend: empty memory");
  if (query.value().cols() != params.query_dim) {
    throw std::invalid_argument("attend: query " + shape_string(query.shape()) +
                                " does not match query_dim " +
                                std::to_string(params.query_dim));
  }
  ad::Var q = matmul(query, tape.parameter(params.w_query)) +
              tape.parameter(params.bias);
  ad::Var v = tape.parameter(params.score);
  std::vector<ad::Var> scores;
  scores.reserve(memory.keys.size());
  for (const ad::Var& key : memory.keys) {
    scores.push_back(matmul(ad::tanh(q + key), v));
  }
  ad::Var logits = ad::concat(scores);
  if (memory.bias) logits = logits + *memory.bias;
  ad::Var weights = ad::softmax(logits);
  if (memory.values.size() == 1) {
    return {memory.values[0] * weights, weights};
  }
  ad::Var context = ad::slice(weights, 0, 1) * memory.values[0];
  for (std::size_t m = 1; m < memory.values.size(); ++m) {
    context = context + ad::slice(weights, m, 1) * memory.values[m];
  }
  return {context, weights};
}

AttentionResult attend(ad::Tape& tape, AttentionParams& params, ad::Var query,
                       std::span<const ad::Var> memory) {
  return attend(tape, params, query, prepare_memory(tape, params, memory));
}

}  // namespace hredgan
