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
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hredgan/config.hpp"
#include "hredgan/corpus.hpp"
#include "hredgan/discriminator.hpp"
#include "hredgan/generator.hpp"
#include "hredgan/optim.hpp"

namespace hredgan {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer progress stored alongside the weights so training can resume.
struct TrainingState {
  std::uint64_t epochs_done = 0;
  std::uint64_t seed = 0;
  OptimizerState optimizer;
};

/// Generator, discriminator and vocabulary as one artifact.
class Model {
 public:
  Model(ModelConfig config, Vocab vocab, std::uint64_t seed);
  // the embedding is shared by pointer between the two networks
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  Generator& generator() { return generator_; }
  Discriminator& discriminator() { return discriminator_; }

  /// All distinct parameters in checkpoint order.
  std::vector<Parameter*> parameters();
  std::vector<Parameter*> generator_parameters();
  /// Discriminator-owned parameters plus the shared embedding and the
  /// context path (eRNN, cRNN).
  std::vector<Parameter*> discriminator_parameters();

  /// FNV-1a over every parameter value's bytes.
  std::uint64_t parameter_hash();

  /// Binary checkpoint: "HREDGAN\0", format version, dims, layer counts,
  /// vocab hash, then named parameter blocks in declaration order as
  /// little-endian float64, then an optional training-state block.
  void save(const std::filesystem::path& path,
            const TrainingState* training = nullptr);
  /// Reads `path`; the vocabulary must hash to the value recorded in the
  /// header.
  static std::unique_ptr<Model> load(const std::filesystem::path& path,
                                     const Vocab& vocab,
                                     std::optional<TrainingState>* training = nullptr);

  /// `<ckpt>.vocab` next to the checkpoint.
  static std::filesystem::path vocab_path(const std::filesystem::path& ckpt);
  /// Loads a checkpoint together with its sibling vocab file.
  static std::unique_ptr<Model> load_with_vocab(
      const std::filesystem::path& path,
      std::optional<TrainingState>* training = nullptr);

 private:
  ModelConfig config_;
  Vocab vocab_;
  Generator generator_;
  Discriminator discriminator_;
};

}  // namespace hredgan
