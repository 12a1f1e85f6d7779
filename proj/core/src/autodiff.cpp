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

#include "hredgan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hredgan::ad {
namespace {

[[noreturn]] void shape_error(Primitive kind, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(primitive_name(kind)) +
                              ": shape mismatch " + shape_string(a) + " vs " +
                              shape_string(b));
}

void require_arity(Primitive kind, std::span<const Var> inputs,
                   std::size_t n) {
  if (inputs.size() != n) {
    throw std::invalid_argument(std::string(primitive_name(kind)) +
                                ": expected " + std::to_string(n) +
                                " inputs, got " +
                                std::to_string(inputs.size()));
  }
}

// Rows/cols broadcast for elementwise binary ops: each operand dimension
// must equal the result dimension or be 1.
struct Broadcast {
  std::size_t rows, cols;
  std::size_t a_rows, a_cols, b_rows, b_cols;

  std::size_t a_index(std::size_t r, std::size_t c) const {
    return (a_rows == 1 ? 0 : r) * a_cols + (a_cols == 1 ? 0 : c);
  }
  std::size_t b_index(std::size_t r, std::size_t c) const {
    return (b_rows == 1 ? 0 : r) * b_cols + (b_cols == 1 ? 0 : c);
  }
};

Broadcast make_broadcast(Primitive kind, const Tensor& a, const Tensor& b) {
  Broadcast bc{};
  bc.a_rows = a.rows();
  bc.a_cols = a.cols();
  bc.b_rows = b.rows();
  bc.b_cols = b.cols();
  auto merge = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    shape_error(kind, a.shape(), b.shape());
  };
  bc.rows = merge(bc.a_rows, bc.b_rows);
  bc.cols = merge(bc.a_cols, bc.b_cols);
  return bc;
}

Shape broadcast_shape(const Tensor& a, const Tensor& b, const Broadcast& bc) {
  if (a.shape() == b.shape()) return a.shape();
  return Shape{bc.rows, bc.cols};
}

// C += A * B for row-major A (m x k), B (k x n).
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (m x k) += G (m x n) * B^T where B is (k x n).
void gemm_nt(const double* g, const double* b, double* c, std::size_t m,
             std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C (k x n) += A^T * G where A is (m x k), G is (m x n).
void gemm_tn(const double* a, const double* g, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view primitive_name(Primitive kind) {
  switch (kind) {
    case Primitive::kMatMul: return "matmul";
    case Primitive::kAdd: return "add";
    case Primitive::kSub: return "sub";
    case Primitive::kMul: return "mul";
    case Primitive::kConcat: return "concat-last-dim";
    case Primitive::kSigmoid: return "sigmoid";
    case Primitive::kTanh: return "tanh";
    case Primitive::kSoftmax: return "softmax-last-dim";
    case Primitive::kLogSoftmax: return "log-softmax-last-dim";
    case Primitive::kGatherRows: return "gather-rows";
    case Primitive::kSum: return "sum";
    case Primitive::kMean: return "mean";
    case Primitive::kSlice: return "slice";
    case Primitive::kScale: return "scale";
    case Primitive::kOneMinus: return "one-minus";
    case Primitive::kLog: return "log";
    case Primitive::kExp: return "exp";
    case Primitive::kPick: return "pick";
    case Primitive::kClamp: return "clamp";
    case Primitive::kLeaf: return "leaf";
  }
  return "unknown";
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node node;
  node.requires_grad = value.requires_grad;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::parameter(Parameter& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node node;
  node.requires_grad = true;
  node.param = &param;
  Var v = push(std::move(node));
  param_nodes_.emplace(&param, v.id());
  return v;
}

const Tensor& Tape::value(Var v) const {
  const Node& node = nodes_[v.id()];
  return node.param != nullptr ? node.param->value : node.value;
}

const Tensor& Tape::grad(Var v) const {
  if (v.id() >= grads_.size() || grads_[v.id()].empty()) {
    static const Tensor kEmpty;
    return kEmpty;
  }
  return grads_[v.id()];
}

Var Tape::apply(Primitive kind, std::span<const Var> inputs, Attrs attrs) {
  for (const Var& in : inputs) {
    if (&in.tape() != this) {
      throw std::invalid_argument(std::string(primitive_name(kind)) +
                                  ": input recorded on a different tape");
    }
  }
  Node node;
  node.kind = kind;
  node.input_begin = static_cast<std::uint32_t>(inputs_.size());
  node.input_count = static_cast<std::uint32_t>(inputs.size());

  auto val = [&](std::size_t i) -> const Tensor& { return value(inputs[i]); };

  switch (kind) {
    case Primitive::kMatMul: {
      require_arity(kind, inputs, 2);
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      if (a.rank() > 2 || b.rank() != 2 || a.cols() != b.shape()[0]) {
        shape_error(kind, a.shape(), b.shape());
      }
      const std::size_t m = a.rows();
      const std::size_t k = a.cols();
      const std::size_t n = b.cols();
      node.value = Tensor::matrix(m, n);
      gemm_nn(a.data().data(), b.data().data(), node.value.data().data(), m, k,
              n);
      break;
    }
    case Primitive::kAdd:
    case Primitive::kSub:
    case Primitive::kMul: {
      require_arity(kind, inputs, 2);
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      const Broadcast bc = make_broadcast(kind, a, b);
      node.value = Tensor(broadcast_shape(a, b, bc));
      auto out = node.value.data();
      const auto ad = a.data();
      const auto bd = b.data();
      for (std::size_t r = 0; r < bc.rows; ++r) {
        for (std::size_t c = 0; c < bc.cols; ++c) {
          const double x = ad[bc.a_index(r, c)];
          const double y = bd[bc.b_index(r, c)];
          out[r * bc.cols + c] = kind == Primitive::kAdd   ? x + y
                                 : kind == Primitive::kSub ? x - y
                                                           : x * y;
        }
      }
      break;
    }
    case Primitive::kConcat: {
      if (inputs.empty()) {
        throw std::invalid_argument("concat-last-dim: no inputs");
      }
      const std::size_t rows = val(0).rows();
      std::size_t cols = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (val(i).rows() != rows) {
          shape_error(kind, val(0).shape(), val(i).shape());
        }
        cols += val(i).cols();
      }
      node.value = Tensor::matrix(rows, cols);
      std::size_t offset = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& part = val(i);
        const std::size_t pc = part.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(part.data().data() + r * pc, pc,
                      node.value.data().data() + r * cols + offset);
        }
        offset += pc;
      }
      break;
    }
    case Primitive::kSigmoid:
    case Primitive::kTanh:
    case Primitive::kLog:
    case Primitive::kExp:
    case Primitive::kOneMinus:
    case Primitive::kScale:
    case Primitive::kClamp: {
      require_arity(kind, inputs, 1);
      const Tensor& x = val(0);
      node.value = Tensor(x.shape());
      auto out = node.value.data();
      const auto xd = x.data();
      for (std::size_t i = 0; i < xd.size(); ++i) {
        const double v = xd[i];
        switch (kind) {
          case Primitive::kSigmoid: out[i] = stable_sigmoid(v); break;
          case Primitive::kTanh: out[i] = std::tanh(v); break;
          case Primitive::kLog: out[i] = std::log(v); break;
          case Primitive::kExp: out[i] = std::exp(v); break;
          case Primitive::kOneMinus: out[i] = 1.0 - v; break;
          case Primitive::kScale: out[i] = attrs.scalar * v; break;
          default: out[i] = std::clamp(v, attrs.lo, attrs.hi); break;
        }
      }
      break;
    }
    case Primitive::kSoftmax:
    case Primitive::kLogSoftmax: {
      require_arity(kind, inputs, 1);
      const Tensor& x = val(0);
      node.value = Tensor(x.shape());
      const std::size_t rows = x.rows();
      const std::size_t cols = x.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data().data() + r * cols;
        double* out = node.value.data().data() + r * cols;
        const double mx = *std::max_element(in, in + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += std::exp(in[c] - mx);
        if (kind == Primitive::kSoftmax) {
          for (std::size_t c = 0; c < cols; ++c) {
            out[c] = std::exp(in[c] - mx) / total;
          }
        } else {
          const double lse = mx + std::log(total);
          for (std::size_t c = 0; c < cols; ++c) out[c] = in[c] - lse;
        }
      }
      break;
    }
    case Primitive::kGatherRows: {
      require_arity(kind, inputs, 1);
      const Tensor& table = val(0);
      const std::size_t width = table.cols();
      const std::size_t height = table.rows();
      node.value = Tensor::matrix(attrs.indices.size(), width);
      for (std::size_t r = 0; r < attrs.indices.size(); ++r) {
        const std::size_t id = attrs.indices[r];
        if (id >= height) {
          throw std::out_of_range("gather-rows: row " + std::to_string(id) +
                                  " outside table of shape " +
                                  shape_string(table.shape()));
        }
        std::copy_n(table.data().data() + id * width, width,
                    node.value.data().data() + r * width);
      }
      break;
    }
    case Primitive::kSum:
    case Primitive::kMean: {
      require_arity(kind, inputs, 1);
      const Tensor& x = val(0);
      double total = 0.0;
      for (double v : x.data()) total += v;
      if (kind == Primitive::kMean) {
        if (x.size() == 0) throw std::invalid_argument("mean: empty tensor");
        total /= static_cast<double>(x.size());
      }
      node.value = Tensor::scalar(total);
      break;
    }
    case Primitive::kSlice: {
      require_arity(kind, inputs, 1);
      const Tensor& x = val(0);
      if (attrs.offset + attrs.length > x.cols() || attrs.length == 0) {
        shape_error(kind, x.shape(),
                    Shape{attrs.offset, attrs.offset + attrs.length});
      }
      const std::size_t rows = x.rows();
      node.value = Tensor::matrix(rows, attrs.length);
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.data().data() + r * x.cols() + attrs.offset,
                    attrs.length, node.value.data().data() + r * attrs.length);
      }
      break;
    }
    case Primitive::kPick: {
      require_arity(kind, inputs, 1);
      const Tensor& x = val(0);
      if (attrs.indices.size() != x.rows()) {
        shape_error(kind, x.shape(), Shape{attrs.indices.size()});
      }
      node.value = Tensor::matrix(x.rows(), 1);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        if (attrs.indices[r] >= x.cols()) {
          throw std::out_of_range("pick: column " +
                                  std::to_string(attrs.indices[r]) +
                                  " outside shape " + shape_string(x.shape()));
        }
        node.value[r] = x.at(r, attrs.indices[r]);
      }
      break;
    }
    case Primitive::kLeaf:
      throw std::invalid_argument("apply: leaf is not an operation");
  }

  for (const Var& in : inputs) {
    inputs_.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  node.attrs = std::move(attrs);
  return push(std::move(node));
}

Tensor& Tape::grad_slot(std::uint32_t id) {
  Tensor& slot = grads_[id];
  if (slot.empty()) {
    const Node& node = nodes_[id];
    if (node.param != nullptr) {
      slot = Tensor(node.param->value.shape(), 0.0);
    } else {
      slot = Tensor(node.value.shape(), 0.0);
    }
  }
  return slot;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) {
    throw std::invalid_argument("backward: loss recorded on a different tape");
  }
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_string(lv.shape()));
  }
  if (!std::isfinite(lv[0])) {
    throw std::domain_error("backward: loss is not finite");
  }
  grads_.assign(nodes_.size(), Tensor());
  grad_slot(loss.id()).fill(1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.requires_grad || grads_[i].empty()) continue;
    if (node.kind == Primitive::kLeaf) {
      if (node.param != nullptr) {
        auto dst = node.param->grad.data();
        const auto src = grads_[i].data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
      continue;
    }
    backprop_node(node, grads_[i]);
    // Interior gradients are no longer needed once pushed to inputs.
    grads_[i] = Tensor();
  }
}

void Tape::backprop_node(const Node& node, const Tensor& g) {
  const std::uint32_t* in = inputs_.data() + node.input_begin;
  auto needs = [&](std::size_t k) { return nodes_[in[k]].requires_grad; };
  auto input_value = [&](std::size_t k) -> const Tensor& {
    return value(Var(this, in[k]));
  };
  const Tensor& y = node.value;

  switch (node.kind) {
    case Primitive::kMatMul: {
      const Tensor& a = input_value(0);
      const Tensor& b = input_value(1);
      const std::size_t m = a.rows();
      const std::size_t k = a.cols();
      const std::size_t n = b.cols();
      if (needs(0)) {
        gemm_nt(g.data().data(), b.data().data(),
                grad_slot(in[0]).data().data(), m, n, k);
      }
      if (needs(1)) {
        gemm_tn(a.data().data(), g.data().data(),
                grad_slot(in[1]).data().data(), m, k, n);
      }
      break;
    }
    case Primitive::kAdd:
    case Primitive::kSub:
    case Primitive::kMul: {
      const Tensor& a = input_value(0);
      const Tensor& b = input_value(1);
      const Broadcast bc = make_broadcast(node.kind, a, b);
      const auto gd = g.data();
      if (needs(0)) {
        auto ga = grad_slot(in[0]).data();
        const auto bd = b.data();
        for (std::size_t r = 0; r < bc.rows; ++r) {
          for (std::size_t c = 0; c < bc.cols; ++c) {
            const double gv = gd[r * bc.cols + c];
            ga[bc.a_index(r, c)] +=
                node.kind == Primitive::kMul ? gv * bd[bc.b_index(r, c)] : gv;
          }
        }
      }
      if (needs(1)) {
        auto gb = grad_slot(in[1]).data();
        const auto ad = a.data();
        for (std::size_t r = 0; r < bc.rows; ++r) {
          for (std::size_t c = 0; c < bc.cols; ++c) {
            const double gv = gd[r * bc.cols + c];
            double contrib = gv;
            if (node.kind == Primitive::kSub) contrib = -gv;
            if (node.kind == Primitive::kMul) contrib = gv * ad[bc.a_index(r, c)];
            gb[bc.b_index(r, c)] += contrib;
          }
        }
      }
      break;
    }
    case Primitive::kConcat: {
      const std::size_t rows = y.rows();
      const std::size_t cols = y.cols();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.input_count; ++k) {
        const std::size_t pc = input_value(k).cols();
        if (needs(k)) {
          double* dst = grad_slot(in[k]).data().data();
          for (std::size_t r = 0; r < rows; ++r) {
            const double* src = g.data().data() + r * cols + offset;
            for (std::size_t c = 0; c < pc; ++c) dst[r * pc + c] += src[c];
          }
        }
        offset += pc;
      }
      break;
    }
    case Primitive::kSigmoid:
    case Primitive::kTanh:
    case Primitive::kLog:
    case Primitive::kExp:
    case Primitive::kOneMinus:
    case Primitive::kScale:
    case Primitive::kClamp: {
      if (!needs(0)) break;
      const Tensor& x = input_value(0);
      auto gx = grad_slot(in[0]).data();
      const auto gd = g.data();
      const auto yd = y.data();
      const auto xd = x.data();
      for (std::size_t i = 0; i < gd.size(); ++i) {
        double d = 0.0;
        switch (node.kind) {
          case Primitive::kSigmoid: d = yd[i] * (1.0 - yd[i]); break;
          case Primitive::kTanh: d = 1.0 - yd[i] * yd[i]; break;
          case Primitive::kLog: d = 1.0 / xd[i]; break;
          case Primitive::kExp: d = yd[i]; break;
          case Primitive::kOneMinus: d = -1.0; break;
          case Primitive::kScale: d = node.attrs.scalar; break;
          default:
            d = (xd[i] > node.attrs.lo && xd[i] < node.attrs.hi) ? 1.0 : 0.0;
            break;
        }
        gx[i] += gd[i] * d;
      }
      break;
    }
    case Primitive::kSoftmax:
    case Primitive::kLogSoftmax: {
      if (!needs(0)) break;
      auto gx = grad_slot(in[0]).data();
      const std::size_t rows = y.rows();
      const std::size_t cols = y.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data().data() + r * cols;
        const double* yr = y.data().data() + r * cols;
        double* out = gx.data() + r * cols;
        if (node.kind == Primitive::kSoftmax) {
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
          for (std::size_t c = 0; c < cols; ++c) out[c] += yr[c] * (gr[c] - dot);
        } else {
          double total = 0.0;
          for (std::size_t c = 0; c < cols; ++c) total += gr[c];
          for (std::size_t c = 0; c < cols; ++c) {
            out[c] += gr[c] - std::exp(yr[c]) * total;
          }
        }
      }
      break;
    }
    case Primitive::kGatherRows: {
      if (!needs(0)) break;
      const std::size_t width = y.cols();
      double* dst = grad_slot(in[0]).data().data();
      for (std::size_t r = 0; r < node.attrs.indices.size(); ++r) {
        double* row = dst + node.attrs.indices[r] * width;
        const double* src = g.data().data() + r * width;
        for (std::size_t c = 0; c < width; ++c) row[c] += src[c];
      }
      break;
    }
    case Primitive::kSum:
    case Primitive::kMean: {
      if (!needs(0)) break;
      auto gx = grad_slot(in[0]).data();
      double gv = g[0];
      if (node.kind == Primitive::kMean) gv /= static_cast<double>(gx.size());
      for (double& v : gx) v += gv;
      break;
    }
    case Primitive::kSlice: {
      if (!needs(0)) break;
      const std::size_t xcols = input_value(0).cols();
      double* dst = grad_slot(in[0]).data().data();
      const std::size_t len = node.attrs.length;
      for (std::size_t r = 0; r < y.rows(); ++r) {
        for (std::size_t c = 0; c < len; ++c) {
          dst[r * xcols + node.attrs.offset + c] += g[r * len + c];
        }
      }
      break;
    }
    case Primitive::kPick: {
      if (!needs(0)) break;
      const std::size_t xcols = input_value(0).cols();
      double* dst = grad_slot(in[0]).data().data();
      for (std::size_t r = 0; r < y.rows(); ++r) {
        dst[r * xcols + node.attrs.indices[r]] += g[r];
      }
      break;
    }
    case Primitive::kLeaf:
      break;
  }
}

Var matmul(Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape().apply(Primitive::kMatMul, in);
}

Var add(Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape().apply(Primitive::kAdd, in);
}

Var sub(Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape().apply(Primitive::kSub, in);
}

Var mul(Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape().apply(Primitive::kMul, in);
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat-last-dim: no inputs");
  if (parts.size() == 1) return parts[0];
  return parts[0].tape().apply(Primitive::kConcat, parts);
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

namespace {
Var unary(Primitive kind, Var x, Attrs attrs = {}) {
  const Var in[] = {x};
  return x.tape().apply(kind, in, std::move(attrs));
}
}  // namespace

Var sigmoid(Var x) { return unary(Primitive::kSigmoid, x); }
Var tanh(Var x) { return unary(Primitive::kTanh, x); }
Var softmax(Var x) { return unary(Primitive::kSoftmax, x); }
Var log_softmax(Var x) { return unary(Primitive::kLogSoftmax, x); }
Var sum(Var x) { return unary(Primitive::kSum, x); }
Var mean(Var x) { return unary(Primitive::kMean, x); }
Var one_minus(Var x) { return unary(Primitive::kOneMinus, x); }
Var log(Var x) { return unary(Primitive::kLog, x); }
Var exp(Var x) { return unary(Primitive::kExp, x); }

Var gather_rows(Var table, std::vector<std::size_t> ids) {
  Attrs attrs;
  attrs.indices = std::move(ids);
  return unary(Primitive::kGatherRows, table, std::move(attrs));
}

Var slice(Var x, std::size_t offset, std::size_t length) {
  Attrs attrs;
  attrs.offset = offset;
  attrs.length = length;
  return unary(Primitive::kSlice, x, std::move(attrs));
}

Var scale(Var x, double factor) {
  Attrs attrs;
  attrs.scalar = factor;
  return unary(Primitive::kScale, x, std::move(attrs));
}

Var pick(Var x, std::vector<std::size_t> columns) {
  Attrs attrs;
  attrs.indices = std::move(columns);
  return unary(Primitive::kPick, x, std::move(attrs));
}

Var clamp(Var x, double lo, double hi) {
  Attrs attrs;
  attrs.lo = lo;
  attrs.hi = hi;
  return unary(Primitive::kClamp, x, std::move(attrs));
}

}  // namespace hredgan::ad
