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

#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hredgan/config.hpp"
#include "hredgan/corpus.hpp"
#include "hredgan/inference.hpp"
#include "hredgan/metrics.hpp"
#include "hredgan/model.hpp"
#include "hredgan/service.hpp"
#include "hredgan/synth.hpp"
#include "hredgan/trainer.hpp"
#include "json.hpp"

namespace hredgan::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct InferenceFlags {
  double alpha = 7.0;
  std::size_t samples = 64;
  std::size_t max_len = 20;
  std::string ranking = "discriminator";
  std::string noise;  // empty keeps the checkpoint's level

  void add(CLI::App* app) {
    app->add_option("--alpha", alpha, "exploration factor (>= 1)")
        ->capture_default_str();
    app->add_option("--L", samples, "candidates per response")->capture_default_str();
    app->add_option("--max-len", max_len, "decode length cap")->capture_default_str();
    app->add_option("--ranking", ranking, "discriminator|combined")
        ->capture_default_str();
    app->add_option("--noise", noise, "override noise level: none|utterance|word");
  }

  InferenceConfig config() const {
    InferenceConfig c;
    c.alpha = alpha;
    c.samples = samples;
    c.max_len = max_len;
    c.ranking = parse_ranking_mode(ranking);
    if (!noise.empty()) c.noise_override = parse_noise_level(noise);
    c.validate();
    return c;
  }
};

std::vector<Dialogue> read_nonempty(const fs::path& path) {
  std::vector<Dialogue> d = read_corpus(path);
  if (d.empty()) throw std::runtime_error(path.string() + ": no dialogues");
  return d;
}

json candidates_json(const Vocab& vocab, const std::vector<RankedCandidate>& ranked) {
  json out = json::array();
  for (const RankedCandidate& c : ranked) {
    out.push_back({{"text", detokenize(vocab.decode(c.tokens))},
                   {"d_score", c.d_score},
                   {"log_prob", c.log_prob},
                   {"rank", c.rank}});
  }
  return out;
}

std::atomic<HttpServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (HttpServer* s = g_server.load()) s->stop();
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::istream& in,
             std::ostream& out, std::ostream& err) {
  CLI::App app{"hredgan: adversarial hierarchical dialogue model"};
  app.require_subcommand(1);

  // train
  std::string config_path, corpus_path, out_path, valid_path, resume_path;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "train a model on a JSONL corpus");
  train_cmd->add_option("--config", config_path, "key = value config file");
  train_cmd->add_option("--corpus", corpus_path, "training dialogues (JSONL)")->required();
  train_cmd->add_option("--out", out_path, "final checkpoint path")->required();
  train_cmd->add_option("--valid", valid_path, "dialogues for the early-stop check");
  train_cmd->add_option("--resume", resume_path, "continue from a checkpoint");
  train_cmd->add_option("--epochs", epochs, "override the configured epochs");
  train_cmd->add_option("--seed", seed, "override the configured seed");
  train_cmd->add_flag("--quiet", quiet, "no per-epoch progress");

  // evaluate
  std::string ckpt, test_path;
  std::uint64_t eval_seed = 1;
  bool csv = false;
  InferenceFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("evaluate", "perplexity and response metrics");
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  eval_cmd->add_option("--test", test_path, "test dialogues (JSONL)")->required();
  eval_cmd->add_option("--seed", eval_seed, "noise seed")->capture_default_str();
  eval_cmd->add_flag("--csv", csv, "print metric,value rows");
  eval_flags.add(eval_cmd);

  // generate
  std::string context_path, gen_out;
  InferenceFlags gen_flags;
  std::uint64_t gen_seed = 1;
  auto* gen_cmd = app.add_subcommand("generate", "ranked responses for a batch of contexts");
  gen_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  gen_cmd->add_option("--context-file", context_path,
                      "one JSON array of context utterances per line")
      ->required();
  gen_cmd->add_option("--out", gen_out, "output file (default: stdout)");
  gen_cmd->add_option("--seed", gen_seed, "noise seed")->capture_default_str();
  gen_flags.add(gen_cmd);

  // calibrate
  std::string cal_valid;
  InferenceFlags cal_flags;
  std::uint64_t cal_seed = 1;
  std::vector<double> grid;
  auto* cal_cmd = app.add_subcommand("calibrate", "grid-search alpha on validation data");
  cal_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  cal_cmd->add_option("--valid", cal_valid, "validation dialogues (JSONL)")->required();
  cal_cmd->add_option("--grid", grid, "alpha values (default 1..20)");
  cal_cmd->add_option("--seed", cal_seed, "noise seed")->capture_default_str();
  cal_flags.add(cal_cmd);

  // synth-corpus
  SynthOptions synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-corpus", "write a synthetic corpus");
  synth_cmd->add_option("--size", synth.size, "dialogues")->capture_default_str();
  synth_cmd->add_option("--vocab", synth.vocab, "target vocabulary")->capture_default_str();
  synth_cmd->add_option("--turns", synth.turns, "utterances per dialogue")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "output JSONL")->required();

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  InferenceFlags serve_flags;
  serve_flags.samples = 8;
  std::uint64_t serve_seed = 1;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP chat service");
  serve_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  serve_cmd->add_option("--host", host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "port (0 picks one)")->capture_default_str();
  serve_cmd->add_option("--seed", serve_seed, "session seed")->capture_default_str();
  serve_flags.add(serve_cmd);

  // chat
  InferenceFlags chat_flags;
  chat_flags.samples = 8;
  std::uint64_t chat_seed = 1;
  bool show_all = false;
  auto* chat_cmd = app.add_subcommand("chat", "terminal conversation");
  chat_cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
  chat_cmd->add_option("--seed", chat_seed, "noise seed")->capture_default_str();
  chat_cmd->add_flag("--candidates", show_all, "list every ranked candidate");
  chat_flags.add(chat_cmd);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*train_cmd) {
      Config config = config_path.empty() ? preset("desk") : load_config(config_path);
      if (epochs > 0) config.train.epochs = epochs;
      if (train_cmd->count("--seed") > 0) config.train.seed = seed;
      const std::vector<Dialogue> corpus = read_nonempty(corpus_path);
      std::vector<Dialogue> valid;
      if (!valid_path.empty()) valid = read_nonempty(valid_path);

      std::unique_ptr<Model> model;
      TrainingState state = initial_training_state(config.train);
      if (!resume_path.empty()) {
        std::optional<TrainingState> saved;
        model = Model::load_with_vocab(resume_path, &saved);
        if (!saved) throw std::runtime_error(resume_path + " has no training state");
        state = *saved;
      } else {
        Vocab vocab = build_vocab(corpus, config.train.max_vocab);
        ModelConfig mc = config.model;
        mc.vocab_size = vocab.size();
        model = std::make_unique<Model>(mc, std::move(vocab), config.train.seed);
      }
      TrainOptions options;
      const fs::path final_path = out_path;
      options.checkpoint_dir =
          final_path.has_parent_path() ? final_path.parent_path() : fs::path(".");
      options.final_checkpoint = final_path;
      options.eval_set = valid;
      if (!quiet) {
        options.on_eval = [&out](std::size_t epoch, double ppl) {
          out << "epoch " << epoch << " perplexity " << ppl << '\n' << std::flush;
        };
      }
      TrainResult result = train(*model, corpus, config.train, state, options);
      out << "trained " << result.state.epochs_done << " epochs, "
          << result.records.size() << " iterations";
      if (result.final_perplexity) out << ", perplexity " << *result.final_perplexity;
      out << "\ncheckpoint " << result.checkpoint.string() << '\n';
      return 0;
    }
    if (*eval_cmd) {
      auto model = Model::load_with_vocab(ckpt);
      const std::vector<Dialogue> test = read_nonempty(test_path);
      EvalReport r = evaluate(*model, test, eval_flags.config(), eval_seed);
      out << (csv ? r.to_csv() : r.to_table());
      return 0;
    }
    if (*gen_cmd) {
      auto model = Model::load_with_vocab(ckpt);
      const InferenceConfig ic = gen_flags.config();
      std::ifstream file(context_path, std::ios::binary);
      if (!file) throw std::runtime_error("cannot read context file " + context_path);
      std::ofstream file_out;
      if (!gen_out.empty()) {
        file_out.open(gen_out, std::ios::binary);
        if (!file_out) throw std::runtime_error("cannot write " + gen_out);
      }
      std::ostream& sink = gen_out.empty() ? out : file_out;
      std::string line;
      std::size_t line_no = 0;
      RandomStream root(gen_seed);
      while (std::getline(file, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json ctx = json::parse(line, nullptr, false);
        if (ctx.is_discarded() || !ctx.is_array() || ctx.empty()) {
          throw std::runtime_error(context_path + ":" + std::to_string(line_no) +
                                   ": expected a non-empty JSON array");
        }
        DialogueState state = model->generator().zero_state(1);
        for (const auto& u : ctx) {
          if (!u.is_string()) {
            throw std::runtime_error(context_path + ":" + std::to_string(line_no) +
                                     ": utterances must be strings");
          }
          state = commit_utterance(*model, state,
                                   model->vocab().encode(tokenize(u.get<std::string>())));
        }
        RandomStream rng = root.derive(line_no);
        auto ranked = propose(*model, state, ic, rng);
        sink << json{{"context", ctx},
                     {"candidates", candidates_json(model->vocab(), ranked)}}
                    .dump()
             << '\n';
      }
      return 0;
    }
    if (*cal_cmd) {
      auto model = Model::load_with_vocab(ckpt);
      const std::vector<Dialogue> valid = read_nonempty(cal_valid);
      if (grid.empty()) grid = default_alpha_grid();
      CalibrationResult r =
          calibrate_alpha(*model, valid, grid, cal_flags.config(), cal_seed);
      out << "alpha,rouge2_f1\n" << std::setprecision(10);
      for (const auto& [a, s] : r.scores) out << a << ',' << s << '\n';
      out << "best alpha " << r.best_alpha << '\n';
      return 0;
    }
    if (*synth_cmd) {
      write_corpus(synth_out, synth_corpus(synth));
      return 0;
    }
    if (*serve_cmd) {
      auto model = Model::load_with_vocab(ckpt);
      ServiceOptions so;
      so.inference = serve_flags.config();
      so.seed = serve_seed;
      ChatService service(*model, so);
      HttpServer server(service);
      const int bound = server.bind(host, port);
      out << "listening on http://" << host << ':' << bound << '\n' << std::flush;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
      return 0;
    }
    if (*chat_cmd) {
      auto model = Model::load_with_vocab(ckpt);
      const InferenceConfig ic = chat_flags.config();
      RandomStream rng(chat_seed);
      DialogueState state = model->generator().zero_state(1);
      std::string line;
      out << "> " << std::flush;
      while (std::getline(in, line)) {
        const Tokens tokens = tokenize(line);
        if (tokens.empty()) {
          out << "> " << std::flush;
          continue;
        }
        if (line == "/quit") break;
        state = commit_utterance(*model, state, model->vocab().encode(tokens));
        Response r = respond(*model, state, ic, rng);
        state = std::move(r.state);
        if (show_all) {
          for (const RankedCandidate& c : r.candidates) {
            out << "  [" << c.rank << "] " << std::fixed << std::setprecision(3)
                << c.d_score << "  " << detokenize(model->vocab().decode(c.tokens))
                << '\n';
          }
        }
        out << detokenize(model->vocab().decode(r.candidates.front().tokens))
            << "\n> " << std::flush;
      }
      out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace hredgan::cli
