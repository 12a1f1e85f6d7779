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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hredgan/autodiff.hpp"
#include "hredgan/tensor.hpp"

namespace hredgan {

enum class Direction { kForward, kBidirectional };

/// One GRU layer (Cho et al. 2014):
///   z = sigmoid(x Wz + h Uz + bz)
///   r = sigmoid(x Wr + h Ur + br)
///   n = tanh(x Wn + (r * h) Un + bn)
///   h' = z * h + (1 - z) * n
/// The three input projections share one matrix with column blocks
/// [update | reset | candidate].
struct GruLayerParams {
  GruLayerParams() = default;
  GruLayerParams(const std::string& name, std::size_t input_dim,
                 std::size_t hidden_dim, RandomStream& rng);

  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter w_input;      // input_dim x 3H
  Parameter u_gates;      // H x 2H, [update | reset]
  Parameter u_candidate;  // H x H
  Parameter bias;         // 1 x 3H

  void collect(std::vector<Parameter*>& out);
};

struct StackedRnnParams {
  StackedRnnParams() = default;
  StackedRnnParams(const std::string& name, std::size_t input_dim,
                   std::size_t hidden_dim, std::size_t layers,
                   Direction direction, RandomStream& rng);

  Direction direction = Direction::kForward;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<GruLayerParams> forward;
  std::vector<GruLayerParams> backward;  // empty unless bidirectional

  std::size_t layers() const { return forward.size(); }
  std::size_t directions() const {
    return direction == Direction::kBidirectional ? 2 : 1;
  }
  /// Per-step output width: hidden_dim, or 2 * hidden_dim if bidirectional.
  std::size_t output_dim() const { return hidden_dim * directions(); }

  void collect(std::vector<Parameter*>& out);
};

/// Additive (Bahdanau) scorer: score_m = v . tanh(q Wq + m_m Wm + b).
struct AttentionParams {
  AttentionParams() = default;
  AttentionParams(const std::string& name, std::size_t query_dim,
                  std::size_t memory_dim, std::size_t align_dim,
                  RandomStream& rng);

  std::size_t query_dim = 0;
  std::size_t memory_dim = 0;
  std::size_t align_dim = 0;
  Parameter w_query;   // query_dim x A
  Parameter w_memory;  // memory_dim x A
  Parameter bias;      // 1 x A
  Parameter score;     // A x 1

  void collect(std::vector<Parameter*>& out);
};

ad::Var gru_step(ad::Tape& tape, GruLayerParams& params, ad::Var input,
                 ad::Var h_prev);

struct RnnResult {
  /// Top-layer output per input step (forward and backward concatenated
  /// when bidirectional).
  std::vector<ad::Var> states;
  /// Last forward state, or [forward terminal | backward terminal].
  ad::Var final;
  /// Terminal state per layer and direction, layer-major.
  std::vector<ad::Var> layer_finals;
};

/// Runs a stacked (bi)directional GRU over `sequence`.
///
/// `h0` holds one initial state per layer and direction (layer-major); an
/// empty span starts from zeros. `mask`, when given, holds one rows x 1
/// tensor per step with 1 for real tokens and 0 for padding; padded steps
/// carry the previous state through unchanged so terminal states land on
/// the last real token in each row.
RnnResult run_rnn(ad::Tape& tape, StackedRnnParams& params,
                  std::span<const ad::Var> sequence,
                  std::span<const ad::Var> h0 = {},
                  std::span<const ad::Var> mask = {});

/// Memory slots with their key projections precomputed, so a decoder can
/// attend at every step without re-projecting.
struct AttentionMemory {
  std::vector<ad::Var> values;
  std::vector<ad::Var> keys;
  /// rows x M additive bias (0 for real slots, large negative for padding).
  std::optional<ad::Var> bias;
};

AttentionMemory prepare_memory(ad::Tape& tape, AttentionParams& params,
                               std::span<const ad::Var> memory,
                               std::optional<ad::Var> bias = std::nullopt);

struct AttentionResult {
  ad::Var context;  // rows x memory_dim
  ad::Var weights;  // rows x M
};

AttentionResult attend(ad::Tape& tape, AttentionParams& params, ad::Var query,
                       const AttentionMemory& memory);
AttentionResult attend(ad::Tape& tape, AttentionParams& params, ad::Var query,
                       std::span<const ad::Var> memory);

}  // namespace hredgan
