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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "hredgan/inference.hpp"
#include "hredgan/metrics.hpp"
#include "hredgan/model.hpp"
#include "hredgan/recurrent.hpp"
#include "hredgan/service.hpp"
#include "hredgan/synth.hpp"
#include "hredgan/trainer.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace hredgan {
namespace {

using Clock = std::chrono::steady_clock;
using testing::check_gradients;
using testing::project;
using testing::random_parameter;
using testing::random_tensor;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

void randomize(std::vector<Parameter*> params, RandomStream& rng) {
  for (Parameter* p : params) {
    for (double& v : p->value.data()) v = rng.uniform(-0.8, 0.8);
  }
}

// ---- 1 -------------------------------------------------------------------

void gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  auto track = [&](const char* what, testing::GradReport r) {
    if (r.worst >= worst) {
      worst = r.worst;
      where = std::string(what) + "/" + r.worst_param;
    }
  };
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    RandomStream rng(seed * 101);
    {
      GruLayerParams p("gru", 3, 4, rng);
      std::vector<Parameter*> ps;
      p.collect(ps);
      randomize(ps, rng);
      Parameter x = random_parameter("x", 2, 3, rng);
      Parameter h = random_parameter("h", 2, 4, rng);
      ps.insert(ps.end(), {&x, &h});
      track("gru_step", check_gradients([&](ad::Tape& t) {
              return project(gru_step(t, p, t.parameter(x), t.parameter(h)));
            }, ps));
    }
    {
      AttentionParams p("attn", 3, 4, 2, rng);
      std::vector<Parameter*> ps;
      p.collect(ps);
      randomize(ps, rng);
      Parameter q = random_parameter("q", 2, 3, rng);
      Parameter m0 = random_parameter("m0", 2, 4, rng);
      Parameter m1 = random_parameter("m1", 2, 4, rng);
      ps.insert(ps.end(), {&q, &m0, &m1});
      track("attention", check_gradients([&](ad::Tape& t) {
              const ad::Var mem[] = {t.parameter(m0), t.parameter(m1)};
              AttentionResult r = attend(t, p, t.parameter(q), mem);
              return project(r.context) + project(r.weights, 5);
            }, ps));
    }
    auto corpus = testing::small_corpus(6, 3, seed);
    auto model = testing::tiny_model(corpus, true, seed);
    randomize(model->parameters(), rng);
    Generator& gen = model->generator();
    DialogueState state = gen.observe(gen.zero_state(1), model->vocab().encode(corpus[0].utterances[0]));
    {
      const Tensor noise = random_tensor(1, 3, rng);
      const std::size_t prev[] = {model->vocab().encode(corpus[0].utterances[1]).front()};
      track("decoder_step", check_gradients([&](ad::Tape& t) {
              TapeState b = gen.bind(t, state);
              auto h = gen.decoder_init(t, b);
              DecoderStep s = gen.decoder_step(t, prev, h, b, t.constant(noise));
              return project(ad::log_softmax(s.logits)) + project(s.hidden.front(), 7);
            }, gen.parameters()));
    }
    {
      Discriminator& d = model->discriminator();
      Parameter ctx = random_parameter("context", 2, 4, rng);
      TokenMatrix x{2, 4, {}};
      for (int i = 0; i < 8; ++i) x.ids.push_back(static_cast<TokenId>(3 + rng.uniform_index(10)));
      Tensor mask = Tensor::matrix(2, 4, 1.0);
      mask.at(1, 3) = 0.0;
      std::vector<Parameter*> ps = d.own_parameters();
      ps.push_back(d.embedding().get());
      ps.push_back(&ctx);
      track("discriminator", check_gradients([&](ad::Tape& t) {
              auto probs = d.word_probs(t, t.parameter(ctx), x, &mask);
              ad::Var total = project(probs[0]);
              for (std::size_t j = 1; j < probs.size(); ++j) total = total + project(probs[j], 11 + j);
              return total;
            }, ps));
    }
    {
      Parameter logits[] = {random_parameter("l0", 3, 6, rng), random_parameter("l1", 3, 6, rng)};
      TokenMatrix truth{3, 2, {1, 2, 3, 4, 5, 0}};
      Tensor mask = Tensor::matrix(3, 2, 1.0);
      mask.at(2, 1) = 0.0;
      track("mle_loss", check_gradients([&](ad::Tape& t) {
              const ad::Var lp[] = {ad::log_softmax(t.parameter(logits[0])),
                                    ad::log_softmax(t.parameter(logits[1]))};
              return mle_loss(lp, truth, &mask);
            }, {&logits[0], &logits[1]}));
    }
    {
      Parameter r0 = random_parameter("r0", 2, 1, rng), r1 = random_parameter("r1", 2, 1, rng);
      Parameter f0 = random_parameter("f0", 2, 1, rng), f1 = random_parameter("f1", 2, 1, rng);
      Tensor m0 = Tensor::matrix(2, 1, 1.0), m1 = Tensor::matrix(2, 1, 1.0);
      m1[1] = 0.0;
      const Tensor masks[] = {m0, m1};
      auto losses = [&](ad::Tape& t) {
        const ad::Var real[] = {ad::sigmoid(t.parameter(r0)), ad::sigmoid(t.parameter(r1))};
        const ad::Var fake[] = {ad::sigmoid(t.parameter(f0)), ad::sigmoid(t.parameter(f1))};
        return gan_losses(real, masks, fake, masks);
      };
      track("d_loss", check_gradients([&](ad::Tape& t) { return losses(t).d_loss; },
                                      {&r0, &r1, &f0, &f1}));
      track("g_adv_loss", check_gradients([&](ad::Tape& t) { return losses(t).g_adv_loss; },
                                          {&f0, &f1}));
    }
  }
  const double secs = seconds_since(t0);
  report(1, "gradient correctness", worst < 1e-6 && secs < 60.0,
         fmt("worst relative error %.3g at %s (limit 1e-6), %.2f s (limit 60 s)", worst,
             where.c_str(), secs));
}

// ---- 2 -------------------------------------------------------------------

void metric_oracles() {
  const auto t0 = Clock::now();
  RandomStream rng(2024);
  double worst = 0.0;
  std::string where;
  auto check = [&](const char* what, double got, double want) {
    const double e = std::abs(got - want);
    if (e > worst || std::isnan(e)) {
      worst = std::isnan(e) ? 1.0 : e;
      where = what;
    }
  };
  std::vector<std::string> words;
  for (int i = 0; i < 10; ++i) words.push_back("w" + std::to_string(i));
  Vocab vocab(words);
  ModelConfig mc = testing::tiny_config();
  mc.vocab_size = vocab.size();
  Model model(mc, vocab, 77);

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(5);
    std::vector<Sentence> cands(n), refs(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto* s : {&cands[i], &refs[i]}) {
        const std::size_t len = rng.uniform_index(9);
        for (std::size_t k = 0; k < len; ++k) s->push_back(static_cast<TokenId>(3 + rng.uniform_index(4)));
      }
    }
    check("bleu2", bleu2(cands, refs), oracle::oracle_bleu2(cands, refs));
    check("rouge2", rouge2_f1(cands, refs), oracle::oracle_rouge2(cands, refs));
    check("distinct1", distinct_n(cands, 1), oracle::oracle_distinct(cands, 1));
    check("distinct2", distinct_n(cands, 2), oracle::oracle_distinct(cands, 2));
    double lg = 0, lt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      lg += static_cast<double>(cands[i].size());
      lt += static_cast<double>(refs[i].size());
    }
    if (lt > 0) check("nasl", nasl(cands, refs), lg / lt);

    // at most 5 responses of at most 8 tokens (EOS included)
    std::vector<Dialogue> dialogues;
    const std::size_t nd = 1 + rng.uniform_index(2);
    for (std::size_t d = 0; d < nd; ++d) {
      std::vector<std::string> turns(2 + rng.uniform_index(2));
      for (auto& u : turns) {
        for (std::size_t k = 0; k <= rng.uniform_index(7); ++k) u += words[rng.uniform_index(10)] + " ";
      }
      dialogues.push_back(make_dialogue(turns));
    }
    PerplexityOptions po;
    po.noise = false;
    const NllTotals want = oracle::direct_nll(model, dialogues);
    check("perplexity", perplexity(model, dialogues, po),
          std::exp(want.nll / static_cast<double>(want.tokens)));
  }
  const double secs = seconds_since(t0);
  report(2, "metric oracles", worst <= 1e-9 && secs < 5.0,
         fmt("worst abs difference %.3g%s%s over 20 corpora (limit 1e-9), %.2f s (limit 5 s)",
             worst, where.empty() ? "" : " in ", where.c_str(), secs));
}

// ---- 3 -------------------------------------------------------------------

void score_identity() {
  RandomStream rng(3);
  double worst = 0.0;
  bool single_exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(1 + rng.uniform_index(12));
    double product = 1.0;
    for (double& v : p) {
      v = rng.uniform(0.01, 1.0);
      product *= v;
    }
    const double want = std::pow(product, 1.0 / static_cast<double>(p.size()));
    worst = std::max(worst, std::abs(sequence_score(WordScoreSequence{p}) - want));
    const double one = rng.uniform(0.0, 1.0);
    single_exact &= sequence_score(WordScoreSequence{{one}}) == one;
  }
  report(3, "sequence score", worst <= 1e-12 && single_exact,
         fmt("worst abs difference %.3g over 100 sequences (limit 1e-12), single-word identity %s",
             worst, single_exact ? "exact" : "broken"));
}

// ---- 4 -------------------------------------------------------------------

void gating() {
  auto corpus = testing::small_corpus(8, 3, 4);
  auto model = testing::tiny_model(corpus);
  const Batch batch = make_batches(corpus, 8, model->vocab()).front();
  GateThresholds gates{0.99, 0.75};
  std::string bad;
  for (double acc : {0.0, 0.5, 0.74, 0.75, 0.9, 0.99, 1.0}) {
    IterationOptions o;
    o.gates = gates;
    o.forced_d_acc = acc;
    OptimizerState opt;
    RandomStream rng(1);
    TrainRecord r = train_iteration(*model, batch, o, opt, rng);
    const bool want_d = acc < 0.99;
    const bool want_g = !(acc < 0.75);
    if (r.d_updated != want_d || r.g_adversarial != want_g) bad += fmt(" %.2f", acc);
  }
  report(4, "update gating", bad.empty(),
         bad.empty() ? "flags match both strict-less-than conditionals at all 7 accuracies"
                     : "mismatch at" + bad);
}

// ---- 5 -------------------------------------------------------------------

void noise_semantics() {
  RandomStream rng(5);
  bool identical = true;
  for (int trial = 0; trial < 10; ++trial) {
    auto z = sample_noise({NoiseLevel::kUtterance, 8, 4.0}, 6, 3, rng);
    for (const Tensor& t : z) identical &= t == z[0];
  }
  double worst = 0.0;
  for (double alpha : {1.0, 4.0, 9.0}) {
    const std::size_t n = 10000, dim = 8;
    auto z = sample_noise({NoiseLevel::kWord, dim, alpha}, n, 1, rng);
    for (std::size_t k = 0; k < dim; ++k) {
      double mean = 0, sq = 0;
      for (const Tensor& t : z) mean += t[k];
      mean /= n;
      for (const Tensor& t : z) sq += (t[k] - mean) * (t[k] - mean);
      worst = std::max(worst, std::abs(sq / (n - 1) - alpha) / alpha);
    }
  }
  report(5, "noise semantics", identical && worst <= 0.10,
         fmt("utterance-level steps %s; worst word-level variance deviation %.2f%% (limit 10%%)",
             identical ? "identical" : "differ", 100 * worst));
}

// ---- 6, 7, 8 -------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  std::size_t vocab = 0;
  double ppl = 0.0;
  std::size_t epochs = 0;
  double secs = 0.0;
  double distinct_noise = 0.0;
  double distinct_plain = 0.0;
  double ppl_no_attention = 0.0;
};

double candidate_distinct2(Model& model, std::span<const Dialogue> corpus, bool noise,
                           std::uint64_t seed) {
  InferenceConfig ic;
  ic.samples = 16;
  ic.alpha = 7.0;
  if (!noise) ic.noise_override = NoiseLevel::kNone;
  std::vector<Sentence> all;
  RandomStream root(seed);
  for (std::size_t i = 0; i < 10 && i < corpus.size(); ++i) {
    DialogueState s = commit_utterance(model, model.generator().zero_state(1),
                                       model.vocab().encode(corpus[i].utterances[0]));
    RandomStream rng = root.derive(i + 1);
    for (Candidate& c : generate_candidates(model, s, ic, rng)) all.push_back(std::move(c.tokens));
  }
  return distinct_n(all, 2);
}

SeedRun desk_run(std::uint64_t seed) {
  SeedRun r;
  r.seed = seed;
  SynthOptions so;
  so.size = 50;
  so.vocab = 200;
  so.seed = seed;
  const std::vector<Dialogue> corpus = synth_corpus(so);
  const Config desk = preset("desk");
  Vocab vocab = build_vocab(corpus, desk.train.max_vocab);
  r.vocab = vocab.size();
  ModelConfig mc = desk.model;
  mc.vocab_size = vocab.size();

  TrainConfig tc = desk.train;
  tc.seed = seed;
  tc.epochs = 300;
  tc.target_perplexity = 1.5;
  tc.eval_every = 10;
  Model model(mc, vocab, seed);
  const auto t0 = Clock::now();
  TrainResult res = train(model, corpus, tc, initial_training_state(tc));
  r.secs = seconds_since(t0);
  r.ppl = res.final_perplexity.value_or(INFINITY);
  r.epochs = res.state.epochs_done;

  r.distinct_noise = candidate_distinct2(model, corpus, true, seed);
  r.distinct_plain = candidate_distinct2(model, corpus, false, seed);

  // ablation under the same corpus, seed and epoch budget
  ModelConfig plain = mc;
  plain.use_attention = false;
  Model ablation(plain, vocab, seed);
  TrainConfig ta = tc;
  ta.epochs = r.epochs;
  ta.target_perplexity = 0.0;
  train(ablation, corpus, ta, initial_training_state(ta));
  PerplexityOptions po;
  po.seed = seed;
  r.ppl_no_attention = perplexity(ablation, corpus, po);
  std::printf("  seed %llu: |V| %zu, perplexity %.4f after %zu epochs in %.1f s; "
              "no-attention %.4f; distinct-2 noise %.4f vs none %.4f\n",
              static_cast<unsigned long long>(seed), r.vocab, r.ppl, r.epochs, r.secs,
              r.ppl_no_attention, r.distinct_noise, r.distinct_plain);
  std::fflush(stdout);
  return r;
}

void desk_training() {
  std::vector<SeedRun> runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) runs.push_back(desk_run(seed));
  int overfit = 0, diverse = 0, ablation = 0;
  for (const SeedRun& r : runs) {
    overfit += r.vocab <= 200 && r.ppl <= 1.5 && r.epochs <= 300 && r.secs <= 600.0;
    diverse += r.distinct_noise > r.distinct_plain;
    ablation += r.ppl < r.ppl_no_attention;
  }
  report(6, "desk overfit", overfit >= 4,
         fmt("%d of 5 seeds reached perplexity <= 1.5 within 300 epochs and 10 min (need 4)", overfit));
  report(7, "noise diversity", diverse >= 4,
         fmt("%d of 5 seeds: distinct-2 over L=16 at alpha 7 exceeds noiseless (need 4)", diverse));
  report(8, "attention ablation", ablation >= 4,
         fmt("%d of 5 seeds: attention perplexity below no-attention at equal epochs (need 4)", ablation));
}

// ---- 9 -------------------------------------------------------------------

std::vector<Tensor> fixed_forward(Model& m, std::span<const Dialogue> corpus) {
  Batch b = make_batches(corpus, corpus.size(), m.vocab()).front();
  RandomStream rng(9);
  Generator& g = m.generator();
  ad::Tape t;
  TapeState s = g.initial_state(t, b.rows());
  std::vector<Tensor> out;
  for (std::size_t i = 0; i + 1 < b.turn_count(); ++i) {
    s = g.update_context(t, s, g.encode_utterance(t, b.turns[i], &b.masks[i]));
    auto noise = sample_noise({m.config().noise_level, m.config().resolved_noise_dim(), 1.0},
                              b.turns[i + 1].cols, b.rows(), rng);
    for (const ad::Var& v : g.teacher_forced_turn(t, s, b.turns[i + 1], noise)) out.push_back(v.value());
    for (const ad::Var& v : m.discriminator().word_probs(t, s.context_vector(), b.turns[i + 1], &b.masks[i + 1])) {
      out.push_back(v.value());
    }
  }
  return out;
}

void checkpoint_roundtrip() {
  testing::TempDir dir;
  auto corpus = testing::small_corpus(6, 3, 9);
  Vocab vocab = build_vocab(corpus, 512);
  ModelConfig mc = preset("desk").model;
  mc.vocab_size = vocab.size();
  Model model(mc, vocab, 9);
  const auto path = dir / "model.ckpt";
  model.save(path);
  auto loaded = Model::load(path, vocab);
  auto a = fixed_forward(model, corpus), b = fixed_forward(*loaded, corpus);
  bool identical = a.size() == b.size();
  for (std::size_t i = 0; identical && i < a.size(); ++i) {
    identical = a[i].shape() == b[i].shape() &&
                std::memcmp(a[i].data().data(), b[i].data().data(), a[i].size() * sizeof(double)) == 0;
  }
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes[3] ^= 0x5a;
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  std::string error;
  try {
    Model::load(path, vocab);
  } catch (const CheckpointError& e) {
    error = e.what();
  }
  const bool named = error.find("corrupted header") != std::string::npos &&
                     error.find(path.string()) != std::string::npos;
  report(9, "checkpoint roundtrip", identical && named,
         fmt("%zu forward tensors %s; corrupted header %s", a.size(),
             identical ? "bit-identical" : "differ",
             named ? ("rejected (\"" + error + "\")").c_str() : "not rejected by name"));
}

// ---- 10 ------------------------------------------------------------------

void service_contract() {
  using nlohmann::json;
  auto corpus = testing::small_corpus(12, 3, 10);
  Vocab vocab = build_vocab(corpus, 512);
  ModelConfig mc = preset("desk").model;
  mc.vocab_size = vocab.size();
  Model model(mc, vocab, 10);
  const std::uint64_t before = model.parameter_hash();
  ServiceOptions so;
  so.inference.samples = 4;
  so.inference.max_len = 8;
  ChatService service(model, so);

  RandomStream rng(10);
  int requests = 0, errors = 0;
  bool sorted = true;
  auto call = [&](const std::string& method, const std::string& path, const json& body) {
    ++requests;
    HttpResponse r = handle_request(service, method, path, body.is_null() ? "" : body.dump());
    if (r.status >= 300) ++errors;
    return r;
  };
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(json::parse(call("POST", "/sessions", nullptr).body)["id"]);
  std::vector<bool> pending(3, false);
  while (requests < 100) {
    const std::size_t s = rng.uniform_index(3);
    const std::string base = "/sessions/" + ids[s];
    if (pending[s] && rng.uniform() < 0.6) {
      call("POST", base + "/commit", {{"rank", rng.uniform_index(4)}});
      pending[s] = false;
    } else if (rng.uniform() < 0.15) {
      call("GET", base, nullptr);
    } else {
      const Dialogue& d = corpus[rng.uniform_index(corpus.size())];
      json body = {{"text", detokenize(d.utterances[rng.uniform_index(d.turns())])}};
      if (rng.uniform() < 0.5) body["alpha"] = 1.0 + static_cast<double>(rng.uniform_index(20));
      json c = json::parse(call("POST", base + "/messages", body).body)["candidates"];
      for (std::size_t k = 1; k < c.size(); ++k) {
        sorted &= c[k - 1]["d_score"].get<double>() >= c[k]["d_score"].get<double>();
      }
      pending[s] = true;
    }
  }
  bool replay = true;
  std::size_t turns = 0;
  for (const std::string& id : ids) {
    const SessionView v = service.get(id);
    turns += v.transcript.size();
    const DialogueState live = service.state(id);
    const DialogueState again = service.replay(v.transcript);
    replay &= live.context_vector() == again.context_vector() && live.history == again.history;
  }
  const bool hash_same = model.parameter_hash() == before;
  report(10, "service contract", hash_same && replay && sorted && errors == 0,
         fmt("%d requests over 3 sessions (%d errors, %zu transcript turns); parameter hash %s; "
             "replay %s; candidates %s",
             requests, errors, turns, hash_same ? "unchanged" : "changed",
             replay ? "equivalent" : "diverged", sorted ? "sorted by d_score" : "unsorted"));
}

}  // namespace
}  // namespace hredgan

int main() {
  using namespace hredgan;
  const std::vector<std::function<void()>> steps = {
      gradient_correctness, metric_oracles, score_identity, gating, noise_semantics,
      checkpoint_roundtrip, service_contract, desk_training};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      std::printf("FAIL (exception: %s)\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
