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

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hredgan/autodiff.hpp"
#include "hredgan/corpus.hpp"
#include "hredgan/model.hpp"
#include "hredgan/synth.hpp"
#include "hredgan/tensor.hpp"

namespace hredgan::testing {

inline Tensor random_tensor(std::size_t rows, std::size_t cols, RandomStream& rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Parameter random_parameter(const std::string& name, std::size_t rows,
                                  std::size_t cols, RandomStream& rng,
                                  double lo = -1.0, double hi = 1.0) {
  return Parameter(name, random_tensor(rows, cols, rng, lo, hi));
}

/// ||a - b|| / max(||a|| + ||b||, 1e-12).
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-12);
}

using ScalarFn = std::function<ad::Var(ad::Tape&)>;

struct GradReport {
  double worst = 0.0;
  std::string worst_param;
};

/// Backward-pass gradients of `f` against central differences, one relative
/// error per parameter; reports the worst.
inline GradReport check_gradients(const ScalarFn& f,
                                  const std::vector<Parameter*>& params,
                                  double h = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  {
    ad::Tape tape;
    tape.backward(f(tape));
  }
  GradReport report;
  for (Parameter* p : params) {
    std::vector<double> analytic(p->grad.data().begin(), p->grad.data().end());
    std::vector<double> numeric(analytic.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      double up;
      {
        ad::Tape tape;
        up = f(tape).value().item();
      }
      p->value[i] = saved - h;
      double down;
      {
        ad::Tape tape;
        down = f(tape).value().item();
      }
      p->value[i] = saved;
      numeric[i] = (up - down) / (2 * h);
    }
    const double err = relative_error(analytic, numeric);
    if (err > report.worst) {
      report.worst = err;
      report.worst_param = p->name;
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return report;
}

/// Scalar projection sum(x * w) with a fixed random weight, so every output
/// element gets a distinct upstream gradient.
inline ad::Var project(ad::Var x, std::uint64_t seed = 99) {
  RandomStream rng(seed);
  const Tensor& v = x.value();
  Tensor w(v.shape());
  for (double& e : w.data()) e = rng.uniform(-1.0, 1.0);
  return ad::sum(x * x.tape().constant(std::move(w)));
}

inline std::vector<Dialogue> small_corpus(std::size_t size = 12, std::size_t turns = 3,
                                          std::uint64_t seed = 5) {
  SynthOptions o;
  o.size = size;
  o.vocab = 60;
  o.turns = turns;
  o.seed = seed;
  return synth_corpus(o);
}

inline ModelConfig tiny_config(bool attention = true) {
  ModelConfig c;
  c.embed_dim = 5;
  c.hidden_dim = 4;
  c.noise_dim = 3;
  c.attention_dim = 3;
  c.use_attention = attention;
  return c;
}

inline std::unique_ptr<Model> tiny_model(const std::vector<Dialogue>& corpus,
                                         bool attention = true,
                                         std::uint64_t seed = 3) {
  Vocab v = build_vocab(corpus, 512);
  ModelConfig c = tiny_config(attention);
  c.vocab_size = v.size();
  return std::make_unique<Model>(c, std::move(v), seed);
}

inline Parameter* find_parameter(Model& model, const std::string& name) {
  for (Parameter* p : model.parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

/// Temporary directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("hredgan-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace hredgan::testing
