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

#include "hredgan/synth.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <stdexcept>
#include <string>

namespace hredgan {
namespace {

constexpr const char* kConsonants[] = {"b", "d", "f", "g", "k", "l", "m",
                                       "n", "p", "r", "s", "t", "v", "z"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};

// Two-syllable pseudo-words in a fixed enumeration order.
std::string pseudo_word(std::size_t index) {
  constexpr std::size_t kC = std::size(kConsonants);
  constexpr std::size_t kV = std::size(kVowels);
  std::string w;
  for (int s = 0; s < 2; ++s) {
    w += kConsonants[index % kC];
    index /= kC;
    w += kVowels[index % kV];
    index /= kV;
  }
  if (index > 0) w += std::to_string(index);
  return w;
}

struct Pools {
  std::vector<std::string> nouns;
  std::vector<std::string> colors;
  std::vector<std::string> places;
  std::vector<std::string> foods;
  std::vector<std::string> friends;
};

// Response templates cycle through these once the opener is answered.
// {n} is the entity, {a} its attribute for that template's pool.
struct Step {
  int pool;  // 0 colors, 1 places, 2 foods, 3 friends, -1 none
  std::vector<std::string> words;
};

const std::vector<Step>& script() {
  static const std::vector<Step> kScript = {
      {0, {"the", "{n}", "is", "{a}", "."}},
      {0, {"why", "is", "the", "{n}", "{a}", "?"}},
      {1, {"because", "it", "lives", "near", "the", "{a}", "."}},
      {2, {"what", "does", "the", "{n}", "eat", "?"}},
      {2, {"the", "{n}", "eats", "{a}", "every", "day", "."}},
      {3, {"who", "is", "the", "{n}", "friend", "?"}},
      {3, {"its", "best", "friend", "is", "{a}", "."}},
      {1, {"where", "can", "i", "find", "the", "{n}", "?"}},
      {1, {"go", "to", "the", "{a}", "and", "look", "."}},
  };
  return kScript;
}

const std::vector<std::vector<std::string>>& openers() {
  static const std::vector<std::vector<std::string>> kOpeners = {
      {"tell", "me", "about", "the", "{n}", "."},
      {"what", "do", "you", "know", "about", "the", "{n}", "?"},
      {"have", "you", "ever", "seen", "a", "{n}", "?"},
      {"i", "want", "to", "hear", "about", "the", "{n}", "."},
  };
  return kOpeners;
}

std::size_t template_word_count() {
  std::set<std::string> words;
  for (const auto& s : script()) {
    for (const auto& w : s.words) words.insert(w);
  }
  for (const auto& o : openers()) {
    for (const auto& w : o) words.insert(w);
  }
  words.erase("{n}");
  words.erase("{a}");
  return words.size();
}

}  // namespace

std::vector<Dialogue> synth_corpus(const SynthOptions& options) {
  if (options.turns < 2) {
    throw std::invalid_argument("synth_corpus: turns must be >= 2");
  }
  RandomStream rng(options.seed);
  const std::size_t fixed = template_word_count();
  const std::size_t budget =
      options.vocab > fixed + 16 ? options.vocab - fixed : 16;
  // half the content budget goes to entities, the rest to four attribute
  // pools
  const std::size_t n_nouns = std::max<std::size_t>(4, budget / 2);
  const std::size_t n_attr =
      std::max<std::size_t>(2, (budget - n_nouns) / 4);

  std::vector<std::string> words;
  for (std::size_t i = 0; words.size() < n_nouns + 4 * n_attr; ++i) {
    words.push_back(pseudo_word(i * 7919 % 4900 + i / 4900 * 4900));
  }
  rng.shuffle(words);
  Pools pools;
  auto take = [&](std::size_t n, std::size_t& at) {
    std::vector<std::string> out(words.begin() + at, words.begin() + at + n);
    at += n;
    return out;
  };
  std::size_t at = 0;
  pools.nouns = take(n_nouns, at);
  pools.colors = take(n_attr, at);
  pools.places = take(n_attr, at);
  pools.foods = take(n_attr, at);
  pools.friends = take(n_attr, at);
  const std::vector<std::string>* attr_pools[] = {&pools.colors, &pools.places,
                                                  &pools.foods, &pools.friends};

  // fixed attribute assignment per entity
  std::vector<std::array<std::size_t, 4>> attributes(n_nouns);
  for (auto& a : attributes) {
    for (std::size_t p = 0; p < 4; ++p) a[p] = rng.uniform_index(n_attr);
  }

  auto render = [&](const std::vector<std::string>& tmpl, std::size_t noun,
                    int pool) {
    Tokens out;
    for (const std::string& w : tmpl) {
      if (w == "{n}") {
        out.push_back(pools.nouns[noun]);
      } else if (w == "{a}" && pool >= 0) {
        out.push_back((*attr_pools[pool])[attributes[noun][pool]]);
      } else {
        out.push_back(w);
      }
    }
    return out;
  };

  std::vector<Dialogue> dialogues;
  dialogues.reserve(options.size);
  for (std::size_t i = 0; i < options.size; ++i) {
    const std::size_t noun = rng.uniform_index(n_nouns);
    const auto& opener = openers()[rng.uniform_index(openers().size())];
    Dialogue d;
    d.utterances.push_back(render(opener, noun, -1));
    for (std::size_t t = 1; t < options.turns; ++t) {
      const Step& step = script()[(t - 1) % script().size()];
      d.utterances.push_back(render(step.words, noun, step.pool));
    }
    dialogues.push_back(std::move(d));
  }
  return dialogues;
}

}  // namespace hredgan
