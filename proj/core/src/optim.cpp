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

#include "hredgan/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace hredgan {
namespace {

std::vector<Parameter*> distinct(std::span<Parameter* const> params) {
  std::vector<Parameter*> out;
  std::unordered_set<Parameter*> seen;
  for (Parameter* p : params) {
    if (p != nullptr && seen.insert(p).second) out.push_back(p);
  }
  return out;
}

}  // namespace

Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, RandomStream& rng) {
  if (fan_in == 0 || fan_out == 0) {
    throw std::invalid_argument("xavier_init: fan_in and fan_out must be >= 1");
  }
  const double bound =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor out = Tensor::matrix(fan_in, fan_out);
  for (double& v : out.data()) v = rng.uniform(-bound, bound);
  return out;
}

double global_grad_norm(std::span<Parameter* const> params) {
  double total = 0.0;
  for (Parameter* p : distinct(params)) {
    for (double g : p->grad.data()) total += g * g;
  }
  return std::sqrt(total);
}

double clip_and_step(std::span<Parameter* const> params,
                     const OptimizerState& state) {
  const std::vector<Parameter*> unique = distinct(params);
  for (Parameter* p : unique) {
    if (!p->grad.all_finite()) {
      throw std::domain_error("clip_and_step: non-finite gradient in " +
                              p->name);
    }
  }
  const double norm = global_grad_norm(unique);
  const double factor =
      norm > state.clip_norm && norm > 0.0 ? state.clip_norm / norm : 1.0;
  const double step = state.learning_rate * factor;
  for (Parameter* p : unique) {
    auto value = p->value.data();
    auto grad = p->grad.data();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= step * grad[i];
    p->zero_grad();
  }
  return norm;
}

OptimizerState maybe_decay_lr(OptimizerState state, double new_adversarial_loss) {
  auto& h = state.adversarial_loss_history;
  h.push_back(new_adversarial_loss);
  const std::size_t n = h.size();
  if (n >= 3 && h[n - 1] > h[n - 2] && h[n - 2] > h[n - 3]) {
    state.learning_rate *= state.decay_factor;
  }
  return state;
}

}  // namespace hredgan
