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
#include <vector>

#include "hredgan/corpus.hpp"

namespace hredgan {

/// Templated question/answer conversations about made-up entities. Every
/// turn after the first is a deterministic function of the entity named in
/// the opener, so a model can in principle predict all responses exactly.
struct SynthOptions {
  std::size_t size = 100;    // dialogues
  std::size_t vocab = 200;   // target distinct tokens, templates included
  std::size_t turns = 3;     // utterances per dialogue, >= 2
  std::uint64_t seed = 7;
};

std::vector<Dialogue> synth_corpus(const SynthOptions& options);

}  // namespace hredgan
