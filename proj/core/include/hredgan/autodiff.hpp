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
#include <initializer_list>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hredgan/tensor.hpp"

namespace hredgan::ad {

/// Differentiable primitive kinds. Every model computation is built from
/// these; each has a hand-written vector-Jacobian product in autodiff.cpp.
enum class Primitive : std::uint8_t {
  kMatMul,
  kAdd,         // broadcasts a size-1 row or column dimension
  kSub,
  kMul,
  kConcat,      // along the last dimension
  kSigmoid,
  kTanh,
  kSoftmax,     // row-wise over the last dimension
  kLogSoftmax,
  kGatherRows,  // table rows selected by attrs.indices
  kSum,         // all elements to a scalar
  kMean,
  kSlice,       // last-dimension columns [offset, offset + length)
  kScale,       // multiply by attrs.scalar
  kOneMinus,
  kLog,
  kExp,
  kPick,        // one column per row, attrs.indices[row]
  kClamp,       // to [attrs.lo, attrs.hi]; zero gradient outside
  kLeaf,
};

std::string_view primitive_name(Primitive kind);

struct Attrs {
  std::vector<std::size_t> indices;
  std::size_t offset = 0;
  std::size_t length = 0;
  double scalar = 1.0;
  double lo = 0.0;
  double hi = 0.0;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid for the
/// lifetime of its tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// One forward recording. Values are computed eagerly; backward() walks the
/// recording in reverse and accumulates into Parameter::grad. A tape is
/// meant to be discarded after its backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a copy of `value`. Gradients are kept for it only when
  /// value.requires_grad is set.
  Var constant(Tensor value);
  /// Leaf aliasing a parameter; repeated calls return the same node.
  Var parameter(Parameter& param);

  Var apply(Primitive kind, std::span<const Var> inputs, Attrs attrs = {});

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Accumulates d(loss)/d(leaf) into every reachable Parameter::grad and
  /// into the retained gradients of requires_grad constants.
  void backward(Var loss);

  /// Gradient retained for a requires_grad constant by the last backward.
  const Tensor& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Primitive kind = Primitive::kLeaf;
    bool requires_grad = false;
    std::uint32_t input_begin = 0;
    std::uint32_t input_count = 0;
    Parameter* param = nullptr;
    Tensor value;
    Attrs attrs;
  };

  Var push(Node node);
  void backprop_node(const Node& node, const Tensor& g);
  Tensor& grad_slot(std::uint32_t id);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> inputs_;
  std::vector<Tensor> grads_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var sigmoid(Var x);
Var tanh(Var x);
Var softmax(Var x);
Var log_softmax(Var x);
Var gather_rows(Var table, std::vector<std::size_t> ids);
Var sum(Var x);
Var mean(Var x);
Var slice(Var x, std::size_t offset, std::size_t length);
Var scale(Var x, double factor);
Var one_minus(Var x);
Var log(Var x);
Var exp(Var x);
Var pick(Var x, std::vector<std::size_t> columns);
Var clamp(Var x, double lo, double hi);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace hredgan::ad
