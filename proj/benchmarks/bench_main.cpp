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

#include <benchmark/benchmark.h>

#include "hredgan/inference.hpp"
#include "hredgan/model.hpp"
#include "hredgan/recurrent.hpp"
#include "hredgan/synth.hpp"
#include "hredgan/trainer.hpp"

namespace hredgan {
namespace {

Tensor filled(std::size_t rows, std::size_t cols, RandomStream& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_MatMulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RandomStream rng(1);
  Parameter a("a", filled(n, n, rng)), b("b", filled(n, n, rng));
  for (auto _ : state) {
    ad::Tape t;
    t.backward(ad::sum(ad::matmul(t.parameter(a), t.parameter(b))));
    benchmark::DoNotOptimize(a.grad.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatMulBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_GruStep(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  RandomStream rng(2);
  GruLayerParams p("gru", h, h, rng);
  const Tensor x = filled(8, h, rng), h0 = filled(8, h, rng);
  for (auto _ : state) {
    ad::Tape t;
    benchmark::DoNotOptimize(gru_step(t, p, t.constant(x), t.constant(h0)).value().data().data());
  }
}
BENCHMARK(BM_GruStep)->Arg(32)->Arg(128);

struct Desk {
  std::vector<Dialogue> corpus;
  std::unique_ptr<Model> model;

  Desk() {
    SynthOptions so;
    so.size = 50;
    corpus = synth_corpus(so);
    Vocab vocab = build_vocab(corpus, 512);
    ModelConfig mc = preset("desk").model;
    mc.vocab_size = vocab.size();
    model = std::make_unique<Model>(mc, std::move(vocab), 1);
  }
};

void BM_TrainIteration(benchmark::State& state) {
  Desk desk;
  const Batch batch = make_batches(desk.corpus, 8, desk.model->vocab()).front();
  OptimizerState opt;
  opt.learning_rate = 0.01;
  RandomStream rng(3);
  for (auto _ : state) {
    IterationOptions o;
    o.decay_lr = false;
    benchmark::DoNotOptimize(train_iteration(*desk.model, batch, o, opt, rng).mle_loss);
  }
}
BENCHMARK(BM_TrainIteration)->Unit(benchmark::kMillisecond);

void BM_Propose(benchmark::State& state) {
  Desk desk;
  Model& m = *desk.model;
  DialogueState s = commit_utterance(m, m.generator().zero_state(1),
                                     m.vocab().encode(desk.corpus[0].utterances[0]));
  InferenceConfig ic;
  ic.samples = static_cast<std::size_t>(state.range(0));
  RandomStream rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(propose(m, s, ic, rng).size());
}
BENCHMARK(BM_Propose)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace hredgan

BENCHMARK_MAIN();
