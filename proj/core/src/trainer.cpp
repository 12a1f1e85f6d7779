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

#include "hredgan/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "hredgan/metrics.hpp"

namespace hredgan {
namespace {

double count_ones(const Tensor& mask) {
  double n = 0;
  for (double v : mask.data()) n += v;
  return n;
}

Tensor column_mask(const Tensor* mask, std::size_t rows, std::size_t step) {
  Tensor m = Tensor::matrix(rows, 1, 1.0);
  if (mask != nullptr) {
    for (std::size_t r = 0; r < rows; ++r) m[r] = mask->at(r, step);
  }
  return m;
}

// sum_j sum_r mask[j][r] * f(p[j])[r]
ad::Var masked_sum(std::span<const ad::Var> values, std::span<const Tensor> masks) {
  ad::Tape& tape = values.front().tape();
  std::vector<ad::Var> terms;
  for (std::size_t j = 0; j < values.size(); ++j) {
    terms.push_back(ad::sum(values[j] * tape.constant(masks[j])));
  }
  ad::Var total = terms.front();
  for (std::size_t j = 1; j < terms.size(); ++j) total = total + terms[j];
  return total;
}

double masked_count(std::span<const Tensor> masks) {
  double n = 0;
  for (const Tensor& m : masks) n += count_ones(m);
  return n;
}

void check_finite(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (!p->grad.all_finite()) {
      throw std::domain_error("train_iteration: non-finite gradient in " + p->name);
    }
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_g >= 0.0 && lambda_m >= 0.0)) {
    throw std::invalid_argument("loss weights must be >= 0");
  }
}

void GateThresholds::validate() const {
  if (!(acc_g_th > 0.0 && acc_g_th <= acc_d_th && acc_d_th <= 1.0)) {
    throw std::invalid_argument("gate thresholds need 0 < acc_g_th <= acc_d_th <= 1");
  }
}

GateDecision gate(double d_acc, const GateThresholds& gates) {
  GateDecision d;
  d.update_discriminator = d_acc < gates.acc_d_th;
  d.generator_adversarial = !(d_acc < gates.acc_g_th);
  return d;
}

std::string TrainRecord::csv_header() {
  return "epoch,iteration,d_acc,mle_loss,d_loss,g_adv_loss,learning_rate,"
         "grad_norm,d_updated,g_adversarial";
}

std::string TrainRecord::csv_row() const {
  std::ostringstream out;
  out << std::setprecision(17) << epoch << ',' << iteration << ',' << d_acc
      << ',' << mle_loss << ',' << d_loss << ',' << g_adv_loss << ','
      << learning_rate << ',' << grad_norm << ',' << (d_updated ? 1 : 0) << ','
      << (g_adversarial ? 1 : 0);
  return out.str();
}

ad::Var mle_loss(std::span<const ad::Var> log_probs, const TokenMatrix& truth,
                 const Tensor* mask) {
  if (log_probs.size() != truth.cols) {
    throw std::invalid_argument("mle_loss: " + std::to_string(log_probs.size()) +
                                " steps vs " + std::to_string(truth.cols) +
                                " ground-truth tokens");
  }
  if (truth.cols == 0) throw std::invalid_argument("mle_loss: empty turn");
  std::vector<ad::Var> picked;
  std::vector<Tensor> masks;
  for (std::size_t j = 0; j < truth.cols; ++j) {
    picked.push_back(ad::pick(log_probs[j], truth.column(j)));
    masks.push_back(column_mask(mask, truth.rows, j));
  }
  const double n = masked_count(masks);
  if (n == 0) throw std::invalid_argument("mle_loss: every position is masked");
  return ad::scale(masked_sum(picked, masks), -1.0 / n);
}

double mle_loss(const TurnDistribution& dist, const TokenMatrix& truth,
                const Tensor* mask) {
  if (dist.steps() != truth.cols) {
    throw std::invalid_argument("mle_loss: " + std::to_string(dist.steps()) +
                                " steps vs " + std::to_string(truth.cols) +
                                " ground-truth tokens");
  }
  double total = 0;
  double n = 0;
  for (std::size_t j = 0; j < truth.cols; ++j) {
    for (std::size_t r = 0; r < truth.rows; ++r) {
      const double m = mask == nullptr ? 1.0 : mask->at(r, j);
      if (m == 0.0) continue;
      total -= m * dist.log_probs[j].at(r, truth.at(r, j));
      n += m;
    }
  }
  if (n == 0) throw std::invalid_argument("mle_loss: every position is masked");
  return total / n;
}

GanLosses gan_losses(std::span<const ad::Var> real, std::span<const Tensor> real_mask,
                     std::span<const ad::Var> fake, std::span<const Tensor> fake_mask) {
  if (real.empty() || fake.empty() || real.size() != real_mask.size() ||
      fake.size() != fake_mask.size()) {
    throw std::invalid_argument("gan_losses: mismatched probabilities and masks");
  }
  const double n_real = masked_count(real_mask);
  const double n_fake = masked_count(fake_mask);
  if (n_real == 0 || n_fake == 0) {
    throw std::invalid_argument("gan_losses: no unmasked tokens");
  }
  std::vector<ad::Var> log_real, log_not_fake, log_fake;
  for (const ad::Var& p : real) log_real.push_back(ad::log(p));
  for (const ad::Var& p : fake) {
    log_not_fake.push_back(ad::log(ad::one_minus(p)));
    log_fake.push_back(ad::log(p));
  }
  GanLosses out;
  out.d_loss = ad::scale(masked_sum(log_real, real_mask), -1.0 / n_real) +
               ad::scale(masked_sum(log_not_fake, fake_mask), -1.0 / n_fake);
  out.g_adv_loss = ad::scale(masked_sum(log_fake, fake_mask), -1.0 / n_fake);
  return out;
}

GanLossValues gan_losses(std::span<const WordScoreSequence> real,
                         std::span<const WordScoreSequence> fake) {
  double sr = 0, sf = 0, sg = 0;
  std::size_t nr = 0, nf = 0;
  for (const auto& s : real) {
    for (double p : s.probs) {
      sr += std::log(p);
      ++nr;
    }
  }
  for (const auto& s : fake) {
    for (double p : s.probs) {
      sf += std::log(1.0 - p);
      sg += std::log(p);
      ++nf;
    }
  }
  if (nr == 0 || nf == 0) throw std::invalid_argument("gan_losses: no tokens");
  GanLossValues out;
  out.d_loss = -sr / static_cast<double>(nr) - sf / static_cast<double>(nf);
  out.g_adv_loss = -sg / static_cast<double>(nf);
  return out;
}

TrainRecord train_iteration(Model& model, const Batch& batch,
                            const IterationOptions& options,
                            OptimizerState& optimizer, RandomStream& rng) {
  options.weights.validate();
  options.gates.validate();
  if (batch.turn_count() < 2) {
    throw std::invalid_argument("train_iteration: batch needs >= 2 turns");
  }
  Generator& gen = model.generator();
  Discriminator& disc = model.discriminator();
  const ModelConfig& mc = model.config();
  NoiseSpec spec{mc.noise_level, mc.resolved_noise_dim(), 1.0};

  ad::Tape tape;
  const std::size_t rows = batch.rows();
  TapeState state = gen.initial_state(tape, rows);
  std::vector<ad::Var> log_probs, real_probs, fake_probs;
  std::vector<Tensor> masks;
  std::vector<WordScoreSequence> real_words, fake_words;
  double mle_sum_tokens = 0;
  std::vector<ad::Var> mle_terms;

  for (std::size_t i = 0; i + 1 < batch.turn_count(); ++i) {
    state = gen.update_context(
        tape, state, gen.encode_utterance(tape, batch.turns[i], &batch.masks[i]));
    const TokenMatrix& truth = batch.turns[i + 1];
    const Tensor& mask = batch.masks[i + 1];
    std::vector<Tensor> noise = sample_noise(spec, truth.cols, rows, rng);
    std::vector<ad::Var> lp = gen.teacher_forced_turn(tape, state, truth, noise);
    TokenMatrix fake = sample_fake_turn(lp, rng);

    const double n = count_ones(mask);
    mle_terms.push_back(ad::scale(mle_loss(lp, truth, &mask), n));
    mle_sum_tokens += n;

    std::vector<ad::Var> pr =
        disc.word_probs(tape, state.context_vector(), truth, &mask);
    std::vector<ad::Var> pf =
        disc.word_probs(tape, state.context_vector(), fake, &mask);
    const auto& lengths = batch.lengths[i + 1];
    for (auto& s : to_sequences(pr, lengths)) real_words.push_back(std::move(s));
    for (auto& s : to_sequences(pf, lengths)) fake_words.push_back(std::move(s));
    for (std::size_t j = 0; j < truth.cols; ++j) {
      real_probs.push_back(pr[j]);
      fake_probs.push_back(pf[j]);
      masks.push_back(column_mask(&mask, rows, j));
    }
  }

  ad::Var mle = mle_terms.front();
  for (std::size_t k = 1; k < mle_terms.size(); ++k) mle = mle + mle_terms[k];
  mle = ad::scale(mle, 1.0 / mle_sum_tokens);
  GanLosses gan = gan_losses(real_probs, masks, fake_probs, masks);

  TrainRecord rec;
  rec.d_acc = accuracy(real_words, fake_words);
  rec.mle_loss = mle.value().item();
  rec.d_loss = gan.d_loss.value().item();
  rec.g_adv_loss = gan.g_adv_loss.value().item();
  rec.learning_rate = optimizer.learning_rate;
  const GateDecision g = gate(options.forced_d_acc.value_or(rec.d_acc), options.gates);
  rec.d_updated = g.update_discriminator;
  rec.g_adversarial = g.generator_adversarial;

  const std::vector<Parameter*> g_params = model.generator_parameters();
  const std::vector<Parameter*> d_params = model.discriminator_parameters();
  const std::vector<Parameter*> all = model.parameters();
  for (Parameter* p : all) p->zero_grad();

  // D gradients are computed first and parked so the generator pass cannot
  // see them; shared parameters take both steps.
  std::vector<Tensor> d_grads;
  if (rec.d_updated) {
    tape.backward(gan.d_loss);
    for (Parameter* p : d_params) d_grads.push_back(p->grad);
    for (Parameter* p : all) p->zero_grad();
  }
  ad::Var g_loss = ad::scale(mle, options.weights.lambda_m);
  if (rec.g_adversarial) {
    g_loss = g_loss + ad::scale(gan.g_adv_loss, options.weights.lambda_g);
  }
  tape.backward(g_loss);

  try {
    check_finite(g_params);
    for (const Tensor& t : d_grads) {
      if (!t.all_finite()) {
        throw std::domain_error("train_iteration: non-finite discriminator gradient");
      }
    }
  } catch (...) {
    for (Parameter* p : all) p->zero_grad();
    throw;
  }

  rec.grad_norm = clip_and_step(g_params, optimizer);
  if (rec.d_updated) {
    for (Parameter* p : all) p->zero_grad();
    for (std::size_t k = 0; k < d_params.size(); ++k) d_params[k]->grad = d_grads[k];
    clip_and_step(d_params, optimizer);
  }
  const double combined =
      options.weights.lambda_g * rec.g_adv_loss + options.weights.lambda_m * rec.mle_loss;
  if (options.decay_lr) optimizer = maybe_decay_lr(std::move(optimizer), combined);
  return rec;
}

TrainingState initial_training_state(const TrainConfig& config) {
  TrainingState s;
  s.seed = config.seed;
  s.optimizer.learning_rate = config.learning_rate;
  s.optimizer.decay_factor = config.decay_factor;
  s.optimizer.clip_norm = config.clip_norm;
  return s;
}

std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& dir,
                                            std::size_t epoch) {
  std::ostringstream name;
  name << "epoch-" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
  return dir / name.str();
}

std::filesystem::path final_checkpoint_path(const std::filesystem::path& dir) {
  return dir / "model.ckpt";
}

namespace {

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto probe = dir / ".write-probe";
  std::ofstream out(probe);
  if (ec || !out) {
    throw std::runtime_error("checkpoint directory " + dir.string() +
                             " is not writable");
  }
  out.close();
  std::filesystem::remove(probe, ec);
}

void save_checkpoint(Model& model, const std::filesystem::path& path,
                     const TrainingState& state) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  model.save(path, &state);
  model.vocab().save(Model::vocab_path(path));
}

}  // namespace

TrainResult train(Model& model, std::span<const Dialogue> corpus,
                  const TrainConfig& config, TrainingState state,
                  const TrainOptions& options) {
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  if (config.batch_size == 0) throw std::invalid_argument("train: batch_size 0");
  IterationOptions it;
  it.weights = {config.lambda_g, config.lambda_m};
  it.gates = {config.acc_d_th, config.acc_g_th};
  it.decay_lr = config.decay_scope == DecayScope::kIteration;
  it.weights.validate();
  it.gates.validate();

  const bool persist = !options.checkpoint_dir.empty();
  std::ofstream log;
  if (persist) {
    prepare_dir(options.checkpoint_dir);
    const auto log_path = options.checkpoint_dir / "train_log.csv";
    const bool fresh = state.epochs_done == 0 || !std::filesystem::exists(log_path);
    log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot write " + log_path.string());
    if (fresh) log << TrainRecord::csv_header() << '\n';
  }
  const std::span<const Dialogue> eval_set =
      options.eval_set.empty() ? corpus : options.eval_set;

  TrainResult result;
  std::vector<Dialogue> order(corpus.begin(), corpus.end());
  std::size_t iteration = 0;
  // iteration numbering stays global across resumes
  {
    const std::size_t per_epoch =
        make_batches(corpus, config.batch_size, model.vocab()).size();
    iteration = state.epochs_done * per_epoch;
  }
  const RandomStream root(config.seed);
  for (std::size_t epoch = state.epochs_done; epoch < config.epochs; ++epoch) {
    RandomStream epoch_rng = root.derive(epoch + 1);
    std::vector<Dialogue> shuffled = order;
    epoch_rng.shuffle(shuffled);
    std::vector<Batch> batches = make_batches(shuffled, config.batch_size, model.vocab());
    std::vector<std::size_t> batch_order(batches.size());
    for (std::size_t b = 0; b < batch_order.size(); ++b) batch_order[b] = b;
    epoch_rng.shuffle(batch_order);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      RandomStream batch_rng = epoch_rng.derive(b + 1);
      TrainRecord rec = train_iteration(model, batches[batch_order[b]], it,
                                        state.optimizer, batch_rng);
      rec.epoch = epoch;
      rec.iteration = iteration++;
      if (log) log << rec.csv_row() << '\n';
      if (options.on_iteration) options.on_iteration(rec);
      epoch_loss += config.lambda_g * rec.g_adv_loss + config.lambda_m * rec.mle_loss;
      result.records.push_back(rec);
    }
    if (!it.decay_lr) {
      state.optimizer = maybe_decay_lr(std::move(state.optimizer),
                                       epoch_loss / static_cast<double>(batches.size()));
    }
    state.epochs_done = epoch + 1;

    if (persist && config.checkpoint_every > 0 &&
        state.epochs_done % config.checkpoint_every == 0) {
      save_checkpoint(model, epoch_checkpoint_path(options.checkpoint_dir,
                                                   state.epochs_done),
                      state);
    }
    const bool eval_now =
        config.target_perplexity > 0 && config.eval_every > 0 &&
        (state.epochs_done % config.eval_every == 0 || state.epochs_done == config.epochs);
    if (eval_now) {
      PerplexityOptions po;
      po.seed = config.seed;
      const double ppl = perplexity(model, eval_set, po);
      result.final_perplexity = ppl;
      if (options.on_eval) options.on_eval(state.epochs_done, ppl);
      if (ppl <= config.target_perplexity) {
        result.stopped_early = state.epochs_done < config.epochs;
        break;
      }
    }
  }
  if (persist) {
    result.checkpoint = options.final_checkpoint.empty()
                            ? final_checkpoint_path(options.checkpoint_dir)
                            : options.final_checkpoint;
    save_checkpoint(model, result.checkpoint, state);
  }
  result.state = std::move(state);
  return result;
}

}  // namespace hredgan
