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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hredgan/tensor.hpp"

namespace hredgan {

using TokenId = std::uint32_t;
using Tokens = std::vector<std::string>;

/// Lowercases, splits on whitespace, and emits every ASCII punctuation
/// character as its own token.
Tokens tokenize(std::string_view text);
std::string detokenize(const Tokens& tokens);

/// A multi-turn conversation: at least one context turn and one response,
/// no empty utterances.
struct Dialogue {
  std::vector<Tokens> utterances;

  std::size_t turns() const { return utterances.size(); }
};

/// Tokenizes each text and validates the dialogue invariants.
Dialogue make_dialogue(const std::vector<std::string>& texts);

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kEos = 2;
  static constexpr std::size_t kSpecials = 3;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kEosToken = "<eos>";

  Vocab();
  /// Non-special tokens in id order (first gets id 3).
  explicit Vocab(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;

  std::vector<TokenId> encode(const Tokens& tokens) const;
  /// Decodes up to (not including) the first EOS; PAD is skipped.
  Tokens decode(std::span<const TokenId> ids) const;

  /// FNV-1a over the id-ordered token list.
  std::uint64_t hash() const;

  /// One non-special token per line; line n holds id n + 3.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Keeps the `max_size` most frequent tokens; ties break lexicographically.
Vocab build_vocab(std::span<const Dialogue> dialogues, std::size_t max_size);

struct CorpusSplit {
  std::vector<Dialogue> train;
  std::vector<Dialogue> valid;
  std::vector<Dialogue> test;
};

/// Seeded shuffle then floor allocation per fraction; the remainder goes to
/// train.
CorpusSplit split_corpus(std::span<const Dialogue> dialogues,
                         std::array<double, 3> fractions, RandomStream& rng);

/// Row-major padded token ids.
struct TokenMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<TokenId> ids;

  TokenId at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
  TokenId& at(std::size_t r, std::size_t c) { return ids[r * cols + c]; }
  /// Column `c` as one id per row.
  std::vector<std::size_t> column(std::size_t c) const;
};

/// Dialogues of equal turn count, each utterance terminated by EOS and
/// padded per turn.
struct Batch {
  std::vector<TokenMatrix> turns;
  std::vector<std::vector<std::size_t>> lengths;  // [turn][row], EOS included
  std::vector<Tensor> masks;                      // [turn], rows x cols of 0/1

  std::size_t rows() const { return turns.empty() ? 0 : turns[0].rows; }
  std::size_t turn_count() const { return turns.size(); }
  /// rows x 1 mask for one step of one turn.
  Tensor step_mask(std::size_t turn, std::size_t step) const;
  std::size_t token_count(std::size_t turn) const;
};

/// Turns one list of utterances into a padded matrix plus lengths and mask.
void pad_turn(std::span<const std::vector<TokenId>> rows, TokenMatrix& out,
              std::vector<std::size_t>& lengths, Tensor& mask);

/// Groups dialogues by turn count (preserving input order within a group)
/// and cuts each group into batches of at most `batch_size`.
std::vector<Batch> make_batches(std::span<const Dialogue> dialogues,
                                std::size_t batch_size, const Vocab& vocab);

/// One JSON array of utterance strings per line.
std::vector<Dialogue> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path,
                  std::span<const Dialogue> dialogues);
std::string corpus_line(const Dialogue& dialogue);

}  // namespace hredgan
