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

#include "hredgan/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace hredgan {
namespace {

constexpr char kMagic[8] = {'H', 'R', 'E', 'D', 'G', 'A', 'N', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

 private:
  void le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, n);
  }
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string file) : in_(in), file_(std::move(file)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) truncated();
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError("checkpoint " + file_ + ": " + what);
  }

 private:
  [[noreturn]] void truncated() const { fail("truncated file"); }
  std::uint64_t le(int n) {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), n);
    if (in_.gcount() != n) truncated();
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string file_;
};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Model::Model(ModelConfig config, Vocab vocab, std::uint64_t seed)
    : config_([&] {
        config.vocab_size = vocab.size();
        return config;
      }()),
      vocab_(std::move(vocab)),
      generator_([&]() -> Generator {
        RandomStream rng(seed);
        return Generator(config_, rng);
      }()),
      discriminator_([&]() -> Discriminator {
        RandomStream rng(splitmix64(seed ^ 0xd15c0000ULL));
        return Discriminator(config_, generator_.embedding(), rng);
      }()) {}

std::vector<Parameter*> Model::generator_parameters() {
  return generator_.parameters();
}

std::vector<Parameter*> Model::discriminator_parameters() {
  std::vector<Parameter*> out = discriminator_.own_parameters();
  for (Parameter* p : generator_.shared_parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = generator_.parameters();
  for (Parameter* p : discriminator_.own_parameters()) out.push_back(p);
  std::unordered_set<Parameter*> seen;
  std::vector<Parameter*> unique;
  for (Parameter* p : out) {
    if (seen.insert(p).second) unique.push_back(p);
  }
  return unique;
}

std::uint64_t Model::parameter_hash() {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Parameter* p : parameters()) {
    h = fnv1a(h, p->value.data().data(), p->value.size() * sizeof(double));
  }
  return h;
}

void Model::save(const std::filesystem::path& path, const TrainingState* training) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    Writer w(out);
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kFormatVersion);
    w.u64(config_.vocab_size);
    w.u64(config_.embed_dim);
    w.u64(config_.hidden_dim);
    w.u64(config_.layers);
    w.u64(config_.disc_layers);
    w.u64(config_.noise_dim);
    w.u64(config_.attention_dim);
    w.u8(config_.use_attention ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(config_.noise_level));
    w.u64(vocab_.hash());

    const std::vector<Parameter*> params = parameters();
    w.u64(params.size());
    for (const Parameter* p : params) {
      w.u32(static_cast<std::uint32_t>(p->name.size()));
      w.bytes(p->name.data(), p->name.size());
      w.u32(static_cast<std::uint32_t>(p->value.rank()));
      for (std::size_t d : p->value.shape()) w.u64(d);
      for (double v : p->value.data()) w.f64(v);
    }
    w.u8(training != nullptr ? 1 : 0);
    if (training != nullptr) {
      w.u64(training->epochs_done);
      w.u64(training->seed);
      w.f64(training->optimizer.learning_rate);
      w.f64(training->optimizer.decay_factor);
      w.f64(training->optimizer.clip_norm);
      const auto& hist = training->optimizer.adversarial_loss_history;
      w.u64(hist.size());
      for (double v : hist) w.f64(v);
    }
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
  vocab_.save(vocab_path(path));
}

std::unique_ptr<Model> Model::load(const std::filesystem::path& path,
                                   const Vocab& vocab,
                                   std::optional<TrainingState>* training) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());

  char magic[sizeof(kMagic)];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    r.fail("corrupted header (bad magic)");
  }
  if (const std::uint32_t version = r.u32(); version != kFormatVersion) {
    r.fail("unsupported format version " + std::to_string(version));
  }
  ModelConfig config;
  config.vocab_size = r.u64();
  config.embed_dim = r.u64();
  config.hidden_dim = r.u64();
  config.layers = r.u64();
  config.disc_layers = r.u64();
  config.noise_dim = r.u64();
  config.attention_dim = r.u64();
  const std::uint8_t attn = r.u8();
  const std::uint8_t level = r.u8();
  if (attn > 1 || level > 2) r.fail("corrupted header (flags)");
  config.use_attention = attn == 1;
  config.noise_level = static_cast<NoiseLevel>(level);
  constexpr std::uint64_t kSane = std::uint64_t{1} << 24;
  if (config.embed_dim == 0 || config.hidden_dim == 0 || config.layers == 0 ||
      config.disc_layers == 0 || config.embed_dim > kSane ||
      config.hidden_dim > kSane || config.layers > 64 || config.disc_layers > 64 ||
      config.vocab_size > kSane) {
    r.fail("corrupted header (dims)");
  }
  const std::uint64_t vocab_hash = r.u64();
  if (config.vocab_size != vocab.size()) {
    r.fail("vocabulary size mismatch (checkpoint " +
           std::to_string(config.vocab_size) + ", vocab " +
           std::to_string(vocab.size()) + ")");
  }
  if (vocab_hash != vocab.hash()) r.fail("vocabulary hash mismatch");

  auto model = std::make_unique<Model>(config, vocab, 0);
  const std::vector<Parameter*> params = model->parameters();
  if (r.u64() != params.size()) r.fail("parameter count mismatch");
  for (Parameter* p : params) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) r.fail("corrupted parameter block");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    if (name != p->name) {
      r.fail("expected parameter '" + p->name + "', found '" + name + "'");
    }
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    if (shape != p->value.shape()) {
      r.fail("shape mismatch for " + name + ": " + shape_string(shape) +
             " vs " + shape_string(p->value.shape()));
    }
    for (double& v : p->value.data()) v = r.f64();
  }
  const std::uint8_t has_training = r.u8();
  if (has_training == 1) {
    TrainingState ts;
    ts.epochs_done = r.u64();
    ts.seed = r.u64();
    ts.optimizer.learning_rate = r.f64();
    ts.optimizer.decay_factor = r.f64();
    ts.optimizer.clip_norm = r.f64();
    const std::uint64_t n = r.u64();
    if (n > (std::uint64_t{1} << 32)) r.fail("corrupted training block");
    ts.optimizer.adversarial_loss_history.resize(n);
    for (double& v : ts.optimizer.adversarial_loss_history) v = r.f64();
    if (training != nullptr) *training = ts;
  } else if (has_training != 0) {
    r.fail("corrupted training block");
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return model;
}

std::filesystem::path Model::vocab_path(const std::filesystem::path& ckpt) {
  return ckpt.string() + ".vocab";
}

std::unique_ptr<Model> Model::load_with_vocab(const std::filesystem::path& path,
                                              std::optional<TrainingState>* training) {
  if (!std::filesystem::exists(path)) {
    throw CheckpointError("checkpoint not found: " + path.string());
  }
  const auto vp = vocab_path(path);
  if (!std::filesystem::exists(vp)) {
    throw CheckpointError("vocabulary file not found: " + vp.string());
  }
  return load(path, Vocab::load(vp), training);
}

}  // namespace hredgan
