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

#include <algorithm>
#include <cmath>
#include <vector>

#include "hredgan/generator.hpp"
#include "hredgan/metrics.hpp"
#include "hredgan/model.hpp"

// Brute-force reference implementations: linear scans over explicit n-gram
// lists, and unbatched per-dialogue likelihood accumulation.
namespace hredgan::oracle {

inline std::vector<Sentence> grams(const Sentence& s, std::size_t n) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) out.emplace_back(s.begin() + i, s.begin() + i + n);
  return out;
}

inline std::size_t occurrences(const std::vector<Sentence>& list, const Sentence& g) {
  return static_cast<std::size_t>(std::count(list.begin(), list.end(), g));
}

inline std::size_t clipped_overlap(const Sentence& cand, const Sentence& ref, std::size_t n) {
  auto c = grams(cand, n), r = grams(ref, n);
  std::vector<Sentence> seen;
  std::size_t total = 0;
  for (const Sentence& g : c) {
    if (occurrences(seen, g) > 0) continue;
    seen.push_back(g);
    total += std::min(occurrences(c, g), occurrences(r, g));
  }
  return total;
}

inline double oracle_bleu2(const std::vector<Sentence>& cands, const std::vector<Sentence>& refs) {
  double log_p = 0;
  for (std::size_t n = 1; n <= 2; ++n) {
    double match = 0, total = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      match += static_cast<double>(clipped_overlap(cands[i], refs[i], n));
      total += static_cast<double>(grams(cands[i], n).size());
    }
    log_p += 0.5 * std::log(std::max(match, 1e-9) / std::max(total, 1e-9));
  }
  double c = 0, r = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    c += static_cast<double>(cands[i].size());
    r += static_cast<double>(refs[i].size());
  }
  if (c == 0) return 0.0;
  const double bp = c < r ? std::exp(1 - r / c) : 1.0;
  return bp * std::exp(log_p);
}

inline double oracle_rouge2(const std::vector<Sentence>& cands, const std::vector<Sentence>& refs) {
  double sum = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].size() < 2 || refs[i].size() < 2) continue;
    const double overlap = static_cast<double>(clipped_overlap(cands[i], refs[i], 2));
    const double p = overlap / static_cast<double>(cands[i].size() - 1);
    const double r = overlap / static_cast<double>(refs[i].size() - 1);
    if (p + r > 0) sum += 2 * p * r / (p + r);
  }
  return sum / static_cast<double>(cands.size());
}

inline double oracle_distinct(const std::vector<Sentence>& responses, std::size_t n) {
  std::vector<Sentence> all, unique;
  for (const Sentence& s : responses) {
    for (const Sentence& g : grams(s, n)) {
      all.push_back(g);
      if (occurrences(unique, g) == 0) unique.push_back(g);
    }
  }
  return all.empty() ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(all.size());
}

/// Response NLL of every dialogue, one unpadded row at a time, zero noise.
inline NllTotals direct_nll(Model& model, std::span<const Dialogue> dialogues) {
  Generator& gen = model.generator();
  NllTotals out;
  for (const Dialogue& d : dialogues) {
    ad::Tape t;
    TapeState s = gen.initial_state(t, 1);
    auto row = [&](std::size_t k) {
      TokenMatrix m;
      m.ids = model.vocab().encode(d.utterances[k]);
      m.ids.push_back(Vocab::kEos);
      m.rows = 1;
      m.cols = m.ids.size();
      return m;
    };
    for (std::size_t i = 0; i + 1 < d.turns(); ++i) {
      s = gen.update_context(t, s, gen.encode_utterance(t, row(i)));
      TokenMatrix truth = row(i + 1);
      std::vector<Tensor> zeros(truth.cols,
                                Tensor::matrix(1, model.config().resolved_noise_dim()));
      auto lp = gen.teacher_forced_turn(t, s, truth, zeros);
      for (std::size_t j = 0; j < truth.cols; ++j) {
        out.nll -= lp[j].value()[truth.at(0, j)];
        ++out.tokens;
      }
    }
  }
  return out;
}

}  // namespace hredgan::oracle
