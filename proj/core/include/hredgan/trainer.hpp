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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hredgan/autodiff.hpp"
#include "hredgan/config.hpp"
#include "hredgan/corpus.hpp"
#include "hredgan/discriminator.hpp"
#include "hredgan/generator.hpp"
#include "hredgan/model.hpp"

namespace hredgan {

struct LossWeights {
  double lambda_g = 1.0;
  double lambda_m = 1.0;

  void validate() const;
};

struct GateThresholds {
  double acc_d_th = 0.99;
  double acc_g_th = 0.75;

  void validate() const;
};

struct GateDecision {
  bool update_discriminator = false;
  bool generator_adversarial = false;
};

/// D steps while acc < acc_d_th; G adds the adversarial term unless
/// acc < acc_g_th.
GateDecision gate(double d_acc, const GateThresholds& gates);

/// One row per iteration.
struct TrainRecord {
  std::size_t epoch = 0;
  std::size_t iteration = 0;  // global, 0-based
  double d_acc = 0.0;
  double mle_loss = 0.0;
  double d_loss = 0.0;
  double g_adv_loss = 0.0;
  double learning_rate = 0.0;  // used for this iteration's step
  double grad_norm = 0.0;      // generator, pre-clip
  bool d_updated = false;
  bool g_adversarial = false;

  static std::string csv_header();
  std::string csv_row() const;
};

/// Mean over unmasked tokens of -log p(token). `mask` holds one rows x steps
/// 0/1 matrix; null means every position counts.
ad::Var mle_loss(std::span<const ad::Var> log_probs, const TokenMatrix& truth,
                 const Tensor* mask = nullptr);
double mle_loss(const TurnDistribution& dist, const TokenMatrix& truth,
                const Tensor* mask = nullptr);

struct GanLosses {
  ad::Var d_loss;
  ad::Var g_adv_loss;
};

/// d = -mean log p_real - mean log(1 - p_fake); g = -mean log p_fake. Each
/// input is one rows x 1 probability per step, masks alike.
GanLosses gan_losses(std::span<const ad::Var> real, std::span<const Tensor> real_mask,
                     std::span<const ad::Var> fake, std::span<const Tensor> fake_mask);

struct GanLossValues {
  double d_loss = 0.0;
  double g_adv_loss = 0.0;
};
GanLossValues gan_losses(std::span<const WordScoreSequence> real,
                         std::span<const WordScoreSequence> fake);

struct IterationOptions {
  LossWeights weights;
  GateThresholds gates;
  /// Overrides the measured accuracy when deciding the gates.
  std::optional<double> forced_d_acc;
  /// Feed this iteration's loss to the decay rule.
  bool decay_lr = true;
};

/// One adversarial update on one batch. Throws without touching any
/// parameter or `optimizer` if a loss or gradient is not finite.
TrainRecord train_iteration(Model& model, const Batch& batch,
                            const IterationOptions& options,
                            OptimizerState& optimizer, RandomStream& rng);

struct TrainOptions {
  /// Where checkpoints and train_log.csv go; empty disables both.
  std::filesystem::path checkpoint_dir;
  /// Final checkpoint path; defaults to checkpoint_dir/model.ckpt.
  std::filesystem::path final_checkpoint;
  /// Dialogues for the early-stop perplexity check; defaults to the
  /// training set.
  std::span<const Dialogue> eval_set;
  std::function<void(const TrainRecord&)> on_iteration;
  std::function<void(std::size_t epoch, double perplexity)> on_eval;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  TrainingState state;
  std::optional<double> final_perplexity;  // last early-stop check
  bool stopped_early = false;
  std::filesystem::path checkpoint;  // final checkpoint, if written
};

/// Fresh optimizer state for `config`.
TrainingState initial_training_state(const TrainConfig& config);

/// Runs epochs from state.epochs_done to config.epochs. Each epoch shuffles
/// the dialogues and batches them; every random draw is derived from
/// (seed, epoch, batch), so resuming from a checkpoint replays exactly.
TrainResult train(Model& model, std::span<const Dialogue> corpus,
                  const TrainConfig& config, TrainingState state,
                  const TrainOptions& options = {});

/// `epoch-NNNN.ckpt` inside `dir`; the final checkpoint is `model.ckpt`.
std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& dir,
                                            std::size_t epoch);
std::filesystem::path final_checkpoint_path(const std::filesystem::path& dir);

}  // namespace hredgan
