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

#include "hredgan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace hredgan {

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Dialogue make_dialogue(const std::vector<std::string>& texts) {
  if (texts.size() < 2) {
    throw std::invalid_argument("dialogue needs at least 2 utterances, got " +
                                std::to_string(texts.size()));
  }
  Dialogue d;
  for (const std::string& text : texts) {
    Tokens tokens = tokenize(text);
    if (tokens.empty()) {
      throw std::invalid_argument("dialogue contains an empty utterance");
    }
    d.utterances.push_back(std::move(tokens));
  }
  return d;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& tokens) {
  tokens_ = {std::string(kPadToken), std::string(kUnkToken),
             std::string(kEosToken)};
  for (const std::string& t : tokens) {
    if (index_.contains(t) || t == kPadToken || t == kUnkToken ||
        t == kEosToken) {
      throw std::invalid_argument("vocab: duplicate or reserved token '" + t +
                                  "'");
    }
    tokens_.push_back(t);
    index_.emplace(t, static_cast<TokenId>(tokens_.size() - 1));
  }
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw std::out_of_range("vocab: id " + std::to_string(id) +
                            " out of range for size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

bool Vocab::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

std::vector<TokenId> Vocab::encode(const Tokens& tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(id(t));
  return out;
}

Tokens Vocab::decode(std::span<const TokenId> ids) const {
  Tokens out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kPad) continue;
    out.push_back(token(id));
  }
  return out;
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& t : tokens_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file " + path.string());
  for (std::size_t i = kSpecials; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\n';
  }
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(tokens);
}

Vocab build_vocab(std::span<const Dialogue> dialogues, std::size_t max_size) {
  if (dialogues.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const Dialogue& d : dialogues) {
    for (const Tokens& u : d.utterances) {
      for (const std::string& t : u) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  // map iteration is already lexicographic; a stable sort keeps that order
  // among equal counts
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> kept;
  for (const auto& [token, count] : ranked) {
    if (kept.size() >= max_size) break;
    if (token == Vocab::kPadToken || token == Vocab::kUnkToken ||
        token == Vocab::kEosToken) {
      continue;
    }
    kept.push_back(token);
  }
  return Vocab(kept);
}

CorpusSplit split_corpus(std::span<const Dialogue> dialogues,
                         std::array<double, 3> fractions, RandomStream& rng) {
  if (dialogues.size() < 3) {
    throw std::invalid_argument("split_corpus: need at least 3 dialogues, got " +
                                std::to_string(dialogues.size()));
  }
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 ||
      std::any_of(fractions.begin(), fractions.end(),
                  [](double f) { return f < 0.0; })) {
    throw std::invalid_argument("split_corpus: fractions must be >= 0 and sum to 1");
  }
  std::vector<std::size_t> order(dialogues.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  const auto n = static_cast<double>(dialogues.size());
  // small epsilon so 0.05 * 100 floors to 5, not 4
  const auto n_valid = static_cast<std::size_t>(std::floor(fractions[1] * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions[2] * n + 1e-9));
  const std::size_t n_train = dialogues.size() - n_valid - n_test;

  CorpusSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Dialogue& d = dialogues[order[i]];
    if (i < n_train) {
      split.train.push_back(d);
    } else if (i < n_train + n_valid) {
      split.valid.push_back(d);
    } else {
      split.test.push_back(d);
    }
  }
  return split;
}

std::vector<std::size_t> TokenMatrix::column(std::size_t c) const {
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
  return out;
}

Tensor Batch::step_mask(std::size_t turn, std::size_t step) const {
  const Tensor& m = masks.at(turn);
  Tensor out = Tensor::matrix(m.rows(), 1);
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m.at(r, step);
  return out;
}

std::size_t Batch::token_count(std::size_t turn) const {
  std::size_t n = 0;
  for (std::size_t len : lengths.at(turn)) n += len;
  return n;
}

void pad_turn(std::span<const std::vector<TokenId>> rows, TokenMatrix& out,
              std::vector<std::size_t>& lengths, Tensor& mask) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.size());
  out.rows = rows.size();
  out.cols = width;
  out.ids.assign(out.rows * width, Vocab::kPad);
  lengths.assign(rows.size(), 0);
  mask = Tensor::matrix(out.rows, width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    lengths[r] = rows[r].size();
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out.at(r, c) = rows[r][c];
      mask.at(r, c) = 1.0;
    }
  }
}

std::vector<Batch> make_batches(std::span<const Dialogue> dialogues,
                                std::size_t batch_size, const Vocab& vocab) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size 0");
  std::map<std::size_t, std::vector<const Dialogue*>> groups;
  for (const Dialogue& d : dialogues) groups[d.turns()].push_back(&d);

  std::vector<Batch> batches;
  for (const auto& [turns, members] : groups) {
    for (std::size_t start = 0; start < members.size(); start += batch_size) {
      const std::size_t end = std::min(members.size(), start + batch_size);
      Batch batch;
      batch.turns.resize(turns);
      batch.lengths.resize(turns);
      batch.masks.resize(turns);
      for (std::size_t t = 0; t < turns; ++t) {
        std::vector<std::vector<TokenId>> rows;
        for (std::size_t i = start; i < end; ++i) {
          std::vector<TokenId> ids = vocab.encode(members[i]->utterances[t]);
          ids.push_back(Vocab::kEos);
          rows.push_back(std::move(ids));
        }
        pad_turn(rows, batch.turns[t], batch.lengths[t], batch.masks[t]);
      }
      batches.push_back(std::move(batch));
    }
  }
  return batches;
}

std::string corpus_line(const Dialogue& dialogue) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Tokens& u : dialogue.utterances) arr.push_back(detokenize(u));
  return arr.dump();
}

std::vector<Dialogue> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file " + path.string());
  std::vector<Dialogue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const auto arr = nlohmann::json::parse(line);
      if (!arr.is_array()) throw std::invalid_argument("expected a JSON array");
      out.push_back(make_dialogue(arr.get<std::vector<std::string>>()));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& path,
                  std::span<const Dialogue> dialogues) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file " + path.string());
  for (const Dialogue& d : dialogues) out << corpus_line(d) << '\n';
}

}  // namespace hredgan
