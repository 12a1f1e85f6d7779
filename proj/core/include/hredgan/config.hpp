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
#include <optional>
#include <string>
#include <string_view>

namespace hredgan {

enum class NoiseLevel { kNone, kUtterance, kWord };
enum class RankingMode { kDiscriminator, kCombined };
/// How often the learning-rate decay rule looks at the loss history.
enum class DecayScope { kIteration, kEpoch };

std::string_view to_string(NoiseLevel level);
std::string_view to_string(RankingMode mode);
std::string_view to_string(DecayScope scope);
NoiseLevel parse_noise_level(std::string_view text);
RankingMode parse_ranking_mode(std::string_view text);
DecayScope parse_decay_scope(std::string_view text);

/// Architecture hyperparameters; everything here is stored in checkpoints.
struct ModelConfig {
  std::size_t vocab_size = 0;  // set from the vocabulary at build time
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t layers = 1;       // per generator RNN
  std::size_t disc_layers = 1;  // discriminator BiRNN
  std::size_t noise_dim = 0;      // 0 means embed_dim
  std::size_t attention_dim = 0;  // 0 means hidden_dim
  bool use_attention = true;
  NoiseLevel noise_level = NoiseLevel::kWord;

  std::size_t resolved_noise_dim() const {
    return noise_dim == 0 ? embed_dim : noise_dim;
  }
  std::size_t resolved_attention_dim() const {
    return attention_dim == 0 ? hidden_dim : attention_dim;
  }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  std::size_t max_vocab = 512;
  std::size_t batch_size = 8;
  std::size_t epochs = 300;
  double learning_rate = 1.0;
  double decay_factor = 0.99;
  /// epoch: one decay check per epoch on the epoch-mean loss
  DecayScope decay_scope = DecayScope::kEpoch;
  double clip_norm = 5.0;
  double lambda_g = 1.0;
  double lambda_m = 1.0;
  double acc_d_th = 0.99;
  double acc_g_th = 0.75;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // epochs; 0 writes only the final one
  /// Stop once teacher-forced training perplexity reaches this value
  /// (checked every eval_every epochs); 0 disables.
  double target_perplexity = 0.0;
  std::size_t eval_every = 10;
};

struct InferenceConfig {
  std::size_t samples = 64;  // L
  double alpha = 7.0;        // exploration factor, >= 1
  std::size_t max_len = 20;
  RankingMode ranking = RankingMode::kDiscriminator;
  std::optional<NoiseLevel> noise_override;

  void validate() const;
};

struct Config {
  ModelConfig model;
  TrainConfig train;
  InferenceConfig inference;
};

/// `paper` (512 hidden, 3 layers, batch 64, |V| 50000) or `desk`
/// (32 hidden, 1 layer, batch 8, |V| <= 512).
Config preset(std::string_view name);

/// Flat `key = value` lines; `#` starts a comment. An optional
/// `preset = paper|desk` line selects the base values (desk otherwise).
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
std::string format_config(const Config& config);

}  // namespace hredgan
