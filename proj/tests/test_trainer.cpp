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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "hredgan/trainer.hpp"
#include "support.hpp"

namespace hredgan {
namespace {

TEST(MleLoss, UniformDistribution) {
  TurnDistribution d;
  for (int j = 0; j < 3; ++j) d.log_probs.push_back(Tensor::matrix(2, 8, -std::log(8.0)));
  TokenMatrix truth{2, 3, {1, 4, 7, 0, 2, 5}};
  EXPECT_NEAR(mle_loss(d, truth), std::log(8.0), 1e-12);
}

TEST(MleLoss, CertainTokensAndMasking) {
  TurnDistribution d;
  TokenMatrix truth{1, 3, {2, 3, 0}};
  for (int j = 0; j < 3; ++j) {
    Tensor lp = Tensor::matrix(1, 4, -1e9);
    lp[truth.at(0, j)] = 0.0;
    d.log_probs.push_back(lp);
  }
  EXPECT_EQ(mle_loss(d, truth), 0.0);

  // masked positions carry arbitrary garbage and must not count
  d.log_probs[2] = Tensor::matrix(1, 4, -50.0);
  Tensor mask = Tensor::matrix(1, 3, 1.0);
  mask[2] = 0.0;
  EXPECT_EQ(mle_loss(d, truth, &mask), 0.0);
  EXPECT_GT(mle_loss(d, truth), 1.0);
}

TEST(MleLoss, TapeMatchesValue) {
  RandomStream rng(1);
  ad::Tape t;
  std::vector<ad::Var> lp;
  for (int j = 0; j < 4; ++j) lp.push_back(ad::log_softmax(t.constant(testing::random_tensor(3, 6, rng))));
  TokenMatrix truth{3, 4, {1, 2, 3, 4, 5, 0, 1, 2, 3, 4, 5, 0}};
  Tensor mask = Tensor::matrix(3, 4, 1.0);
  mask.at(2, 3) = 0.0;
  EXPECT_NEAR(mle_loss(lp, truth, &mask).value().item(),
              mle_loss(TurnDistribution::from(lp), truth, &mask), 1e-12);
  double oracle = 0;
  int n = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (mask.at(r, j) == 0.0) continue;
      oracle -= lp[j].value().at(r, truth.at(r, j));
      ++n;
    }
  }
  EXPECT_NEAR(mle_loss(lp, truth, &mask).value().item(), oracle / n, 1e-12);
}

TEST(MleLoss, LengthMismatch) {
  TurnDistribution d;
  d.log_probs.push_back(Tensor::matrix(1, 4));
  EXPECT_THROW(mle_loss(d, TokenMatrix{1, 2, {1, 2}}), std::invalid_argument);
}

TEST(GanLosses, CoinFlip) {
  const WordScoreSequence half[] = {{{0.5, 0.5, 0.5}}, {{0.5}}};
  GanLossValues v = gan_losses(half, half);
  EXPECT_NEAR(v.d_loss, 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(v.g_adv_loss, std::log(2.0), 1e-12);
}

TEST(GanLosses, PerfectDiscriminator) {
  const WordScoreSequence real[] = {{{1 - kProbEpsilon, 1 - kProbEpsilon}}};
  const WordScoreSequence fake[] = {{{kProbEpsilon, kProbEpsilon}}};
  EXPECT_LT(gan_losses(real, fake).d_loss, 1e-9);
}

TEST(GanLosses, GeneratorLossFallsAsFakeRises) {
  const WordScoreSequence real[] = {{{0.5}}};
  double prev = std::numeric_limits<double>::infinity();
  for (double p = 0.01; p < 1.0; p += 0.01) {
    const WordScoreSequence fake[] = {{{p}}};
    const double g = gan_losses(real, fake).g_adv_loss;
    EXPECT_LT(g, prev);
    prev = g;
  }
}

TEST(GanLosses, TapeMatchesValue) {
  ad::Tape t;
  Tensor r0 = Tensor::matrix(2, 1), r1 = Tensor::matrix(2, 1);
  Tensor f0 = Tensor::matrix(2, 1), f1 = Tensor::matrix(2, 1);
  r0[0] = 0.9; r0[1] = 0.6; r1[0] = 0.7; r1[1] = 0.123;
  f0[0] = 0.2; f0[1] = 0.4; f1[0] = 0.3; f1[1] = 0.456;
  Tensor m0 = Tensor::matrix(2, 1, 1.0), m1 = Tensor::matrix(2, 1, 1.0);
  m1[1] = 0.0;  // second row has one word
  const ad::Var real[] = {t.constant(r0), t.constant(r1)};
  const ad::Var fake[] = {t.constant(f0), t.constant(f1)};
  const Tensor masks[] = {m0, m1};
  GanLosses tape = gan_losses(real, masks, fake, masks);
  const WordScoreSequence rw[] = {{{0.9, 0.7}}, {{0.6}}};
  const WordScoreSequence fw[] = {{{0.2, 0.3}}, {{0.4}}};
  GanLossValues v = gan_losses(rw, fw);
  EXPECT_NEAR(tape.d_loss.value().item(), v.d_loss, 1e-12);
  EXPECT_NEAR(tape.g_adv_loss.value().item(), v.g_adv_loss, 1e-12);
  const double d = -(std::log(0.9) + std::log(0.7) + std::log(0.6)) / 3 -
                   (std::log(0.8) + std::log(0.7) + std::log(0.6)) / 3;
  EXPECT_NEAR(v.d_loss, d, 1e-12);
}

TEST(Gate, MatchesTheTwoConditionals) {
  GateThresholds g;
  for (double acc : {0.0, 0.5, 0.74, 0.75, 0.9, 0.99, 1.0}) {
    GateDecision d = gate(acc, g);
    EXPECT_EQ(d.update_discriminator, acc < 0.99) << acc;
    EXPECT_EQ(d.generator_adversarial, !(acc < 0.75)) << acc;
  }
}

TEST(Gate, Validation) {
  EXPECT_THROW((GateThresholds{0.5, 0.75}.validate()), std::invalid_argument);
  EXPECT_THROW((GateThresholds{1.1, 0.75}.validate()), std::invalid_argument);
  EXPECT_THROW((GateThresholds{0.9, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((GateThresholds{0.99, 0.75}.validate()));
  EXPECT_THROW((LossWeights{-1.0, 1.0}.validate()), std::invalid_argument);
}

struct TrainerTest : ::testing::Test {
  std::vector<Dialogue> corpus = testing::small_corpus(32, 3, 7);
  std::unique_ptr<Model> model = testing::tiny_model(corpus);

  Batch first_batch() { return make_batches(corpus, 8, model->vocab()).front(); }
  OptimizerState optimizer(double lr = 0.1) {
    OptimizerState s;
    s.learning_rate = lr;
    return s;
  }
  TrainRecord run(double forced_acc, std::uint64_t seed = 1) {
    IterationOptions o;
    o.forced_d_acc = forced_acc;
    OptimizerState opt = optimizer();
    RandomStream rng(seed);
    return train_iteration(*model, first_batch(), o, opt, rng);
  }
  std::vector<Tensor> values(const std::vector<Parameter*>& ps) {
    std::vector<Tensor> out;
    for (Parameter* p : ps) out.push_back(p->value);
    return out;
  }
};

TEST_F(TrainerTest, InjectedAccuracyDrivesFlags) {
  TrainRecord high = run(1.0);
  EXPECT_FALSE(high.d_updated);
  EXPECT_TRUE(high.g_adversarial);
  TrainRecord half = run(0.5);
  EXPECT_TRUE(half.d_updated);
  EXPECT_FALSE(half.g_adversarial);
  TrainRecord mid = run(0.9);
  EXPECT_TRUE(mid.d_updated);
  EXPECT_TRUE(mid.g_adversarial);
}

TEST_F(TrainerTest, FrozenDiscriminatorWhenGateClosed) {
  std::vector<Parameter*> own = model->discriminator().own_parameters();
  auto before = values(own);
  run(1.0);
  auto after = values(own);
  for (std::size_t k = 0; k < own.size(); ++k) EXPECT_EQ(before[k], after[k]) << own[k]->name;
  run(0.5);
  bool moved = false;
  for (std::size_t k = 0; k < own.size(); ++k) moved |= !(own[k]->value == after[k]);
  EXPECT_TRUE(moved);
}

TEST_F(TrainerTest, RecordIsFiniteAndParametersStayFinite) {
  RandomStream rng(2);
  OptimizerState opt = optimizer(0.5);
  TrainRecord rec = train_iteration(*model, first_batch(), {}, opt, rng);
  for (double v : {rec.d_acc, rec.mle_loss, rec.d_loss, rec.g_adv_loss, rec.grad_norm}) {
    EXPECT_TRUE(std::isfinite(v));
  }
  EXPECT_GE(rec.d_acc, 0.0);
  EXPECT_LE(rec.d_acc, 1.0);
  EXPECT_EQ(rec.d_updated, gate(rec.d_acc, {}).update_discriminator);
  EXPECT_EQ(rec.g_adversarial, gate(rec.d_acc, {}).generator_adversarial);
  for (Parameter* p : model->parameters()) EXPECT_TRUE(p->value.all_finite()) << p->name;
}

TEST_F(TrainerTest, LambdaMScalesMleStep) {
  // parameters outside the discriminator's reach only see the generator step
  auto delta = [&](double lambda_m) {
    auto m = testing::tiny_model(corpus);
    std::vector<Parameter*> gen_only;
    const auto d = m->discriminator_parameters();
    for (Parameter* p : m->generator_parameters()) {
      if (std::find(d.begin(), d.end(), p) == d.end()) gen_only.push_back(p);
    }
    auto before = values(gen_only);
    IterationOptions o;
    o.forced_d_acc = 0.5;  // MLE only
    o.weights.lambda_m = lambda_m;
    OptimizerState opt = optimizer(0.01);
    opt.clip_norm = 1e12;
    RandomStream rng(3);
    train_iteration(*m, make_batches(corpus, 8, m->vocab()).front(), o, opt, rng);
    std::vector<double> out;
    for (std::size_t k = 0; k < gen_only.size(); ++k) {
      for (std::size_t i = 0; i < before[k].size(); ++i) {
        out.push_back(gen_only[k]->value[i] - before[k][i]);
      }
    }
    return out;
  };
  auto one = delta(1.0), two = delta(2.0);
  ASSERT_EQ(one.size(), two.size());
  std::vector<double> doubled;
  for (double v : one) doubled.push_back(2 * v);
  EXPECT_LT(testing::relative_error(doubled, two), 1e-8);
  double norm = 0;
  for (double v : one) norm += v * v;
  EXPECT_GT(norm, 0.0);
}

TEST_F(TrainerTest, NonFiniteLossLeavesStateIntact) {
  Parameter* w = testing::find_parameter(*model, "output.w");
  ASSERT_NE(w, nullptr);
  w->value[0] = std::numeric_limits<double>::quiet_NaN();
  const std::uint64_t hash = model->parameter_hash();
  OptimizerState opt = optimizer();
  opt.adversarial_loss_history = {3.0, 2.0};
  RandomStream rng(4);
  EXPECT_THROW(train_iteration(*model, first_batch(), {}, opt, rng), std::domain_error);
  EXPECT_EQ(model->parameter_hash(), hash);
  EXPECT_EQ(opt.learning_rate, 0.1);
  EXPECT_EQ(opt.adversarial_loss_history, (std::vector<double>{3.0, 2.0}));
}

TEST_F(TrainerTest, SingleTurnBatchRejected) {
  Batch b = first_batch();
  b.turns.resize(1);
  b.masks.resize(1);
  b.lengths.resize(1);
  OptimizerState opt = optimizer();
  RandomStream rng(5);
  EXPECT_THROW(train_iteration(*model, b, {}, opt, rng), std::invalid_argument);
}

TrainConfig quick_config(std::size_t epochs) {
  TrainConfig c;
  c.batch_size = 8;
  c.epochs = epochs;
  c.learning_rate = 0.5;
  c.seed = 11;
  return c;
}

TEST_F(TrainerTest, TwoEpochsOfFourBatches) {
  ASSERT_EQ(make_batches(corpus, 8, model->vocab()).size(), 4u);
  testing::TempDir dir;
  TrainConfig c = quick_config(2);
  TrainOptions o;
  o.checkpoint_dir = dir.path;
  TrainResult r = train(*model, corpus, c, initial_training_state(c), o);
  ASSERT_EQ(r.records.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(r.records[i].iteration, i);
    EXPECT_EQ(r.records[i].epoch, i / 4);
  }
  EXPECT_EQ(r.state.epochs_done, 2u);
  EXPECT_TRUE(std::filesystem::exists(r.checkpoint));
  std::ifstream log(dir / "train_log.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(log, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 9u);
  EXPECT_EQ(lines[0], TrainRecord::csv_header());
  EXPECT_EQ(lines[1], r.records[0].csv_row());
}

TEST_F(TrainerTest, DeterministicGivenSeed) {
  TrainConfig c = quick_config(2);
  TrainResult a = train(*model, corpus, c, initial_training_state(c));
  auto other = testing::tiny_model(corpus);
  TrainResult b = train(*other, corpus, c, initial_training_state(c));
  EXPECT_EQ(model->parameter_hash(), other->parameter_hash());
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].csv_row(), b.records[i].csv_row());
  }
}

TEST_F(TrainerTest, ResumeReplaysIdentically) {
  testing::TempDir dir;
  TrainConfig c = quick_config(4);
  c.checkpoint_every = 2;
  TrainOptions o;
  o.checkpoint_dir = dir.path;
  TrainResult full = train(*model, corpus, c, initial_training_state(c), o);

  std::optional<TrainingState> state;
  auto resumed = Model::load(epoch_checkpoint_path(dir.path, 2), model->vocab(), &state);
  ASSERT_TRUE(state.has_value());
  EXPECT_EQ(state->epochs_done, 2u);
  testing::TempDir dir2;
  o.checkpoint_dir = dir2.path;
  TrainResult tail = train(*resumed, corpus, c, *state, o);
  ASSERT_EQ(tail.records.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(tail.records[i].csv_row(), full.records[8 + i].csv_row());
  }
  EXPECT_EQ(resumed->parameter_hash(), model->parameter_hash());
}

TEST_F(TrainerTest, UnwritableDirectoryFailsBeforeTraining) {
  testing::TempDir dir;
  std::ofstream(dir / "file") << "x";
  const std::uint64_t hash = model->parameter_hash();
  TrainOptions o;
  o.checkpoint_dir = dir / "file" / "sub";
  TrainConfig c = quick_config(1);
  EXPECT_THROW(train(*model, corpus, c, initial_training_state(c), o), std::runtime_error);
  EXPECT_EQ(model->parameter_hash(), hash);
}

TEST_F(TrainerTest, EarlyStopReportsPerplexity) {
  TrainConfig c = quick_config(6);
  c.target_perplexity = 1e6;
  c.eval_every = 2;
  std::vector<std::size_t> evals;
  TrainOptions o;
  o.on_eval = [&](std::size_t epoch, double) { evals.push_back(epoch); };
  TrainResult r = train(*model, corpus, c, initial_training_state(c), o);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.state.epochs_done, 2u);
  EXPECT_EQ(evals, (std::vector<std::size_t>{2}));
  ASSERT_TRUE(r.final_perplexity.has_value());
  EXPECT_GT(*r.final_perplexity, 1.0);
}

TEST_F(TrainerTest, MleTrainingLowersLoss) {
  TrainConfig c = quick_config(15);
  c.lambda_g = 0.0;
  TrainResult r = train(*model, corpus, c, initial_training_state(c));
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    first += r.records[i].mle_loss;
    last += r.records[r.records.size() - 1 - i].mle_loss;
  }
  EXPECT_LT(last, first);
}

TEST(TrainRecord, CsvShape) {
  TrainRecord r;
  r.epoch = 1;
  r.iteration = 5;
  r.d_updated = true;
  const std::string header = TrainRecord::csv_header();
  const std::string row = r.csv_row();
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_EQ(row.substr(0, 4), "1,5,");
}

}  // namespace
}  // namespace hredgan
