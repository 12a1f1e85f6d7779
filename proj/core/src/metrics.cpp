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

#include "hredgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hredgan/inference.hpp"
#include "hredgan/model.hpp"

namespace hredgan {
namespace {

constexpr double kFloor = 1e-9;

using Ngram = std::vector<TokenId>;

std::map<Ngram, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<Ngram, std::size_t> out;
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++out[Ngram(s.begin() + static_cast<std::ptrdiff_t>(i),
                s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

std::size_t clipped_overlap(const std::map<Ngram, std::size_t>& cand,
                            const std::map<Ngram, std::size_t>& ref) {
  std::size_t n = 0;
  for (const auto& [gram, count] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) n += std::min(count, it->second);
  }
  return n;
}

void check_aligned(std::span<const Sentence> a, std::span<const Sentence> b,
                   const char* what) {
  if (a.empty()) throw std::invalid_argument(std::string(what) + ": empty corpus");
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": " +
                                std::to_string(a.size()) + " candidates vs " +
                                std::to_string(b.size()) + " references");
  }
}

// Row r of every per-step noise matrix comes from its own stream keyed by the
// dialogue and turn, so results do not depend on how rows are batched.
std::vector<Tensor> row_noise(const NoiseSpec& spec, std::size_t steps,
                              std::span<const std::size_t> dialogue_ids,
                              std::size_t turn, std::uint64_t seed) {
  const std::size_t rows = dialogue_ids.size();
  std::vector<Tensor> out(steps, Tensor::matrix(rows, spec.dim));
  if (spec.level == NoiseLevel::kNone || spec.dim == 0) return out;
  for (std::size_t r = 0; r < rows; ++r) {
    RandomStream rng = RandomStream(seed)
                           .derive(dialogue_ids[r] + 1)
                           .derive(turn + 1);
    std::vector<Tensor> draw = sample_noise(spec, steps, 1, rng);
    for (std::size_t j = 0; j < steps; ++j) {
      std::copy_n(draw[j].data().data(), spec.dim,
                  out[j].data().data() + r * spec.dim);
    }
  }
  return out;
}

}  // namespace

double bleu2(std::span<const Sentence> candidates,
             std::span<const Sentence> references) {
  check_aligned(candidates, references, "bleu2");
  double matches[2] = {0, 0};
  double totals[2] = {0, 0};
  double cand_len = 0;
  double ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += static_cast<double>(candidates[i].size());
    ref_len += static_cast<double>(references[i].size());
    for (std::size_t n = 1; n <= 2; ++n) {
      auto c = ngram_counts(candidates[i], n);
      auto r = ngram_counts(references[i], n);
      matches[n - 1] += static_cast<double>(clipped_overlap(c, r));
      if (candidates[i].size() >= n) {
        totals[n - 1] += static_cast<double>(candidates[i].size() - n + 1);
      }
    }
  }
  if (cand_len == 0) return 0.0;
  double log_p = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double m = std::max(matches[k], kFloor);
    const double t = std::max(totals[k], kFloor);
    log_p += 0.5 * std::log(m / t);
  }
  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  return bp * std::exp(log_p);
}

double rouge2_f1(std::span<const Sentence> candidates,
                 std::span<const Sentence> references) {
  check_aligned(candidates, references, "rouge2_f1");
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].size() < 2 || references[i].size() < 2) continue;
    auto c = ngram_counts(candidates[i], 2);
    auto r = ngram_counts(references[i], 2);
    const auto overlap = static_cast<double>(clipped_overlap(c, r));
    if (overlap == 0) continue;
    const double p = overlap / static_cast<double>(candidates[i].size() - 1);
    const double rc = overlap / static_cast<double>(references[i].size() - 1);
    total += 2 * p * rc / (p + rc);
  }
  return total / static_cast<double>(candidates.size());
}

double distinct_n(std::span<const Sentence> responses, std::size_t n) {
  if (n == 0) throw std::invalid_argument("distinct_n: n must be >= 1");
  std::set<Ngram> unique;
  std::size_t total = 0;
  for (const Sentence& s : responses) {
    for (const auto& [gram, count] : ngram_counts(s, n)) {
      unique.insert(gram);
      total += count;
    }
  }
  return total == 0 ? 0.0
                    : static_cast<double>(unique.size()) / static_cast<double>(total);
}

double nasl(std::span<const Sentence> generated,
            std::span<const Sentence> ground_truth) {
  if (generated.empty() || ground_truth.empty()) {
    throw std::invalid_argument("nasl: empty corpus");
  }
  double g = 0;
  double t = 0;
  for (const Sentence& s : generated) g += static_cast<double>(s.size());
  for (const Sentence& s : ground_truth) t += static_cast<double>(s.size());
  g /= static_cast<double>(generated.size());
  t /= static_cast<double>(ground_truth.size());
  if (t == 0) throw std::invalid_argument("nasl: ground truth has zero mean length");
  return g / t;
}

NllTotals teacher_forced_nll(Model& model, std::span<const Dialogue> dialogues,
                             const PerplexityOptions& options) {
  if (dialogues.empty()) throw std::invalid_argument("perplexity: empty dataset");
  if (options.batch_size == 0) {
    throw std::invalid_argument("perplexity: batch_size must be >= 1");
  }
  Generator& gen = model.generator();
  NoiseSpec spec;
  spec.level = options.noise ? model.config().noise_level : NoiseLevel::kNone;
  spec.dim = model.config().resolved_noise_dim();

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    groups[dialogues[i].turns()].push_back(i);
  }
  NllTotals totals;
  for (const auto& [turns, members] : groups) {
    for (std::size_t start = 0; start < members.size();
         start += options.batch_size) {
      const std::size_t end = std::min(members.size(), start + options.batch_size);
      std::span<const std::size_t> ids(members.data() + start, end - start);
      std::vector<Dialogue> chunk;
      for (std::size_t i : ids) chunk.push_back(dialogues[i]);
      const Batch batch = make_batches(chunk, chunk.size(), model.vocab()).front();

      ad::Tape tape;
      TapeState state = gen.initial_state(tape, batch.rows());
      for (std::size_t t = 0; t + 1 < batch.turn_count(); ++t) {
        state = gen.update_context(
            tape, state,
            gen.encode_utterance(tape, batch.turns[t], &batch.masks[t]));
        const TokenMatrix& truth = batch.turns[t + 1];
        std::vector<Tensor> noise =
            row_noise(spec, truth.cols, ids, t + 1, options.seed);
        std::vector<ad::Var> logp =
            gen.teacher_forced_turn(tape, state, truth, noise);
        const Tensor& mask = batch.masks[t + 1];
        for (std::size_t j = 0; j < truth.cols; ++j) {
          const Tensor& lp = logp[j].value();
          for (std::size_t r = 0; r < truth.rows; ++r) {
            if (mask.at(r, j) == 0.0) continue;
            totals.nll -= lp.at(r, truth.at(r, j));
            ++totals.tokens;
          }
        }
      }
    }
  }
  return totals;
}

double perplexity(Model& model, std::span<const Dialogue> dialogues,
                  const PerplexityOptions& options) {
  NllTotals t = teacher_forced_nll(model, dialogues, options);
  if (t.tokens == 0) throw std::invalid_argument("perplexity: no response tokens");
  return std::exp(t.nll / static_cast<double>(t.tokens));
}

bool EvalReport::in_range() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return perplexity >= 1.0 && unit(bleu2) && unit(rouge2_f1) &&
         unit(distinct1) && unit(distinct2) && nasl >= 0.0;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "metric,value\n"
      << "perplexity," << perplexity << '\n'
      << "bleu2," << bleu2 << '\n'
      << "rouge2_f1," << rouge2_f1 << '\n'
      << "distinct1," << distinct1 << '\n'
      << "distinct2," << distinct2 << '\n'
      << "nasl," << nasl << '\n';
  return out.str();
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::left << std::setw(12) << "Perplexity" << std::setw(10) << "BLEU-2"
      << std::setw(10) << "ROUGE-2" << std::setw(12) << "DISTINCT-1"
      << std::setw(12) << "DISTINCT-2" << "NASL\n";
  out << std::fixed << std::setprecision(4) << std::setw(12) << perplexity
      << std::setw(10) << bleu2 << std::setw(10) << rouge2_f1 << std::setw(12)
      << distinct1 << std::setw(12) << distinct2 << nasl << '\n';
  out << "dialogues=" << dialogues << " responses=" << responses
      << " tokens=" << tokens << '\n';
  return out.str();
}

Predictions predict_responses(Model& model, std::span<const Dialogue> dialogues,
                              const InferenceConfig& inference,
                              std::uint64_t seed) {
  Predictions out;
  const Vocab& vocab = model.vocab();
  Generator& gen = model.generator();
  RandomStream root(seed);
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    RandomStream rng = root.derive(i + 1);
    DialogueState state = gen.zero_state(1);
    const auto& turns = dialogues[i].utterances;
    for (std::size_t t = 0; t + 1 < turns.size(); ++t) {
      state = gen.observe(state, vocab.encode(turns[t]));
      std::vector<RankedCandidate> ranked = propose(model, state, inference, rng);
      out.generated.push_back(ranked.front().tokens);
      out.references.push_back(vocab.encode(turns[t + 1]));
    }
  }
  return out;
}

EvalReport evaluate(Model& model, std::span<const Dialogue> test,
                    const InferenceConfig& inference, std::uint64_t seed) {
  EvalReport report;
  PerplexityOptions opts;
  opts.seed = seed;
  NllTotals nll = teacher_forced_nll(model, test, opts);
  report.perplexity = std::exp(nll.nll / static_cast<double>(nll.tokens));
  report.tokens = nll.tokens;
  report.dialogues = test.size();
  Predictions p = predict_responses(model, test, inference, seed);
  report.responses = p.generated.size();
  report.bleu2 = bleu2(p.generated, p.references);
  report.rouge2_f1 = rouge2_f1(p.generated, p.references);
  report.distinct1 = distinct_n(p.generated, 1);
  report.distinct2 = distinct_n(p.generated, 2);
  report.nasl = nasl(p.generated, p.references);
  return report;
}

}  // namespace hredgan
