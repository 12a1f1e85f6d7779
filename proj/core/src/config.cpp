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

#include "hredgan/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hredgan {

std::string_view to_string(NoiseLevel level) {
  switch (level) {
    case NoiseLevel::kNone: return "none";
    case NoiseLevel::kUtterance: return "utterance";
    case NoiseLevel::kWord: return "word";
  }
  return "none";
}

std::string_view to_string(RankingMode mode) {
  return mode == RankingMode::kDiscriminator ? "discriminator" : "combined";
}

std::string_view to_string(DecayScope scope) {
  return scope == DecayScope::kIteration ? "iteration" : "epoch";
}

DecayScope parse_decay_scope(std::string_view text) {
  if (text == "iteration") return DecayScope::kIteration;
  if (text == "epoch") return DecayScope::kEpoch;
  throw std::invalid_argument("unknown decay scope '" + std::string(text) +
                              "' (iteration|epoch)");
}

NoiseLevel parse_noise_level(std::string_view text) {
  if (text == "none") return NoiseLevel::kNone;
  if (text == "utterance") return NoiseLevel::kUtterance;
  if (text == "word") return NoiseLevel::kWord;
  throw std::invalid_argument("unknown noise level '" + std::string(text) +
                              "' (none|utterance|word)");
}

RankingMode parse_ranking_mode(std::string_view text) {
  if (text == "discriminator") return RankingMode::kDiscriminator;
  if (text == "combined") return RankingMode::kCombined;
  throw std::invalid_argument("unknown ranking mode '" + std::string(text) +
                              "' (discriminator|combined)");
}

void InferenceConfig::validate() const {
  if (samples < 1) throw std::invalid_argument("inference: L must be >= 1");
  if (!(alpha >= 1.0)) throw std::invalid_argument("inference: alpha must be >= 1");
  if (max_len < 1) throw std::invalid_argument("inference: max_len must be >= 1");
}

Config preset(std::string_view name) {
  Config c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.model.embed_dim = 512;
    c.model.hidden_dim = 512;
    c.model.layers = 3;
    c.model.disc_layers = 3;
    c.train.max_vocab = 50000;
    c.train.batch_size = 64;
    c.train.learning_rate = 0.5;
    c.train.decay_factor = 0.99;
    c.train.decay_scope = DecayScope::kIteration;
    c.train.clip_norm = 5.0;
    c.inference.samples = 64;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) +
                              "' (paper|desk)");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: bad value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on") return true;
  if (text == "false" || text == "0" || text == "off") return false;
  throw std::invalid_argument("config: bad boolean '" + text + "' for " + key);
}

using Setter = std::function<void(Config&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> kSetters = {
      {"embed_dim", [](Config& c, const auto& k, const auto& v) { c.model.embed_dim = parse_number<std::size_t>(k, v); }},
      {"hidden_dim", [](Config& c, const auto& k, const auto& v) { c.model.hidden_dim = parse_number<std::size_t>(k, v); }},
      {"layers", [](Config& c, const auto& k, const auto& v) { c.model.layers = parse_number<std::size_t>(k, v); }},
      {"disc_layers", [](Config& c, const auto& k, const auto& v) { c.model.disc_layers = parse_number<std::size_t>(k, v); }},
      {"noise_dim", [](Config& c, const auto& k, const auto& v) { c.model.noise_dim = parse_number<std::size_t>(k, v); }},
      {"attention_dim", [](Config& c, const auto& k, const auto& v) { c.model.attention_dim = parse_number<std::size_t>(k, v); }},
      {"attention", [](Config& c, const auto& k, const auto& v) { c.model.use_attention = parse_bool(k, v); }},
      {"noise_level", [](Config& c, const auto&, const auto& v) { c.model.noise_level = parse_noise_level(v); }},
      {"max_vocab", [](Config& c, const auto& k, const auto& v) { c.train.max_vocab = parse_number<std::size_t>(k, v); }},
      {"batch_size", [](Config& c, const auto& k, const auto& v) { c.train.batch_size = parse_number<std::size_t>(k, v); }},
      {"epochs", [](Config& c, const auto& k, const auto& v) { c.train.epochs = parse_number<std::size_t>(k, v); }},
      {"learning_rate", [](Config& c, const auto& k, const auto& v) { c.train.learning_rate = parse_number<double>(k, v); }},
      {"decay_factor", [](Config& c, const auto& k, const auto& v) { c.train.decay_factor = parse_number<double>(k, v); }},
      {"decay_scope", [](Config& c, const auto&, const auto& v) { c.train.decay_scope = parse_decay_scope(v); }},
      {"clip_norm", [](Config& c, const auto& k, const auto& v) { c.train.clip_norm = parse_number<double>(k, v); }},
      {"lambda_g", [](Config& c, const auto& k, const auto& v) { c.train.lambda_g = parse_number<double>(k, v); }},
      {"lambda_m", [](Config& c, const auto& k, const auto& v) { c.train.lambda_m = parse_number<double>(k, v); }},
      {"acc_d_th", [](Config& c, const auto& k, const auto& v) { c.train.acc_d_th = parse_number<double>(k, v); }},
      {"acc_g_th", [](Config& c, const auto& k, const auto& v) { c.train.acc_g_th = parse_number<double>(k, v); }},
      {"seed", [](Config& c, const auto& k, const auto& v) { c.train.seed = parse_number<std::uint64_t>(k, v); }},
      {"checkpoint_every", [](Config& c, const auto& k, const auto& v) { c.train.checkpoint_every = parse_number<std::size_t>(k, v); }},
      {"target_perplexity", [](Config& c, const auto& k, const auto& v) { c.train.target_perplexity = parse_number<double>(k, v); }},
      {"eval_every", [](Config& c, const auto& k, const auto& v) { c.train.eval_every = parse_number<std::size_t>(k, v); }},
      {"samples", [](Config& c, const auto& k, const auto& v) { c.inference.samples = parse_number<std::size_t>(k, v); }},
      {"alpha", [](Config& c, const auto& k, const auto& v) { c.inference.alpha = parse_number<double>(k, v); }},
      {"max_len", [](Config& c, const auto& k, const auto& v) { c.inference.max_len = parse_number<std::size_t>(k, v); }},
      {"ranking", [](Config& c, const auto&, const auto& v) { c.inference.ranking = parse_ranking_mode(v); }},
  };
  return kSetters;
}

void validate(const Config& c) {
  const auto& t = c.train;
  if (c.model.embed_dim == 0 || c.model.hidden_dim == 0 || c.model.layers == 0 ||
      c.model.disc_layers == 0) {
    throw std::invalid_argument("config: dims and layer counts must be >= 1");
  }
  if (t.lambda_g < 0.0 || t.lambda_m < 0.0) {
    throw std::invalid_argument("config: loss weights must be >= 0");
  }
  if (!(t.acc_g_th > 0.0 && t.acc_g_th <= t.acc_d_th && t.acc_d_th <= 1.0)) {
    throw std::invalid_argument("config: need 0 < acc_g_th <= acc_d_th <= 1");
  }
  if (!(t.learning_rate > 0.0)) {
    throw std::invalid_argument("config: learning_rate must be > 0");
  }
  if (!(t.decay_factor > 0.0 && t.decay_factor < 1.0)) {
    throw std::invalid_argument("config: decay_factor must be in (0, 1)");
  }
  if (!(t.clip_norm > 0.0)) throw std::invalid_argument("config: clip_norm must be > 0");
  if (t.batch_size == 0) throw std::invalid_argument("config: batch_size must be >= 1");
  c.inference.validate();
}

}  // namespace

Config parse_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string preset_name = "desk";
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "preset") {
      preset_name = value;
    } else if (!setters().contains(key)) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
    } else {
      entries.emplace_back(std::move(key), std::move(value));
    }
  }
  Config config = preset(preset_name);
  for (const auto& [key, value] : entries) setters().at(key)(config, key, value);
  validate(config);
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string format_config(const Config& c) {
  std::ostringstream out;
  out.precision(17);
  out << "embed_dim = " << c.model.embed_dim << '\n'
      << "hidden_dim = " << c.model.hidden_dim << '\n'
      << "layers = " << c.model.layers << '\n'
      << "disc_layers = " << c.model.disc_layers << '\n'
      << "noise_dim = " << c.model.noise_dim << '\n'
      << "attention_dim = " << c.model.attention_dim << '\n'
      << "attention = " << (c.model.use_attention ? "true" : "false") << '\n'
      << "noise_level = " << to_string(c.model.noise_level) << '\n'
      << "max_vocab = " << c.train.max_vocab << '\n'
      << "batch_size = " << c.train.batch_size << '\n'
      << "epochs = " << c.train.epochs << '\n'
      << "learning_rate = " << c.train.learning_rate << '\n'
      << "decay_factor = " << c.train.decay_factor << '\n'
      << "decay_scope = " << to_string(c.train.decay_scope) << '\n'
      << "clip_norm = " << c.train.clip_norm << '\n'
      << "lambda_g = " << c.train.lambda_g << '\n'
      << "lambda_m = " << c.train.lambda_m << '\n'
      << "acc_d_th = " << c.train.acc_d_th << '\n'
      << "acc_g_th = " << c.train.acc_g_th << '\n'
      << "seed = " << c.train.seed << '\n'
      << "checkpoint_every = " << c.train.checkpoint_every << '\n'
      << "target_perplexity = " << c.train.target_perplexity << '\n'
      << "eval_every = " << c.train.eval_every << '\n'
      << "samples = " << c.inference.samples << '\n'
      << "alpha = " << c.inference.alpha << '\n'
      << "max_len = " << c.inference.max_len << '\n'
      << "ranking = " << to_string(c.inference.ranking) << '\n';
  return out.str();
}

}  // namespace hredgan
