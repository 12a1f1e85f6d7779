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

#include <span>
#include <vector>

#include "hredgan/tensor.hpp"

namespace hredgan {

struct OptimizerState {
  double learning_rate = 0.5;
  double decay_factor = 0.99;
  double clip_norm = 5.0;
  std::vector<double> adversarial_loss_history;
};

/// Glorot/Xavier uniform: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
/// Returns a fan_in x fan_out matrix.
Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, RandomStream& rng);

/// L2 norm over the gradients of every distinct parameter in `params`.
double global_grad_norm(std::span<Parameter* const> params);

/// Global-norm gradient clipping followed by a plain SGD step. Gradients are
/// zeroed afterwards. Throws before touching any value if a gradient is not
/// finite. Returns the pre-clip norm.
double clip_and_step(std::span<Parameter* const> params,
                     const OptimizerState& state);

/// Records `new_adversarial_loss`; when the last two consecutive deltas in
/// the history are both strictly positive the learning rate is multiplied by
/// the decay factor.
OptimizerState maybe_decay_lr(OptimizerState state, double new_adversarial_loss);

}  // namespace hredgan
