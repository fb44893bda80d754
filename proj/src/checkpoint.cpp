// Copyright 2026 The FusionDeepMF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fusiondeepmf/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "fusiondeepmf/errors.hpp"

namespace fdmf {
namespace {

constexpr char kMagic[8] = {'F', 'D', 'M', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
// Guards against absurd allocations from corrupt headers.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint truncated");
  return v;
}

void PutString(std::ostream& out, std::string_view s) {
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string GetString(std::istream& in) {
  const auto len = Get<std::uint32_t>(in);
  if (len > (1u << 20)) throw ParseError("checkpoint string too long");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw ParseError("checkpoint truncated");
  return s;
}

void PutKeys(std::ostream& out, const KeyIndex& keys) {
  Put<std::uint64_t>(out, keys.size());
  for (const auto& k : keys.keys()) PutString(out, k);
}

KeyIndex GetKeys(std::istream& in) {
  const auto n = Get<std::uint64_t>(in);
  if (n > kMaxElements) throw ParseError("checkpoint key count corrupt");
  KeyIndex keys;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string k = GetString(in);
    if (keys.Intern(k) != i) throw ParseError("duplicate key in checkpoint");
  }
  return keys;
}

using Sections = std::vector<std::pair<std::string, const DenseMatrix*>>;

void AddBlocks(Sections& out, const std::string& prefix, BlockList blocks) {
  for (const auto& b : blocks) out.emplace_back(prefix + b.name, b.matrix);
}

DenseMatrix Take(std::map<std::string, DenseMatrix>& sections,
                 const std::string& tag) {
  auto it = sections.find(tag);
  if (it == sections.end()) {
    throw ParseError("checkpoint missing section " + tag);
  }
  DenseMatrix m = std::move(it->second);
  sections.erase(it);
  return m;
}

void FillBlocks(std::map<std::string, DenseMatrix>& sections,
                const std::string& prefix, BlockList blocks) {
  for (auto& b : blocks) *b.matrix = Take(sections, prefix + b.name);
}

void LoadMlp(std::map<std::string, DenseMatrix>& sections, MlpParams& mlp) {
  std::size_t layers = 0;
  while (sections.count("mlp.tower_w" + std::to_string(layers)) != 0) ++layers;
  if (layers == 0) throw ParseError("checkpoint has no MLP tower");
  mlp.tower_weights.resize(layers);
  mlp.tower_biases.resize(layers);
  FillBlocks(sections, "mlp.", mlp.Blocks());
}

}  // namespace

const char* ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMf: return "mf";
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kFusion: return "fusion";
  }
  return "unknown";
}

void SaveCheckpoint(const Checkpoint& ckpt, std::ostream& out) {
  // Block views need non-const access; the matrices are only read here.
  auto& model = const_cast<FusionModel&>(ckpt.model);
  Sections sections;
  if (ckpt.kind != ModelKind::kMlp) AddBlocks(sections, "mf.", model.mf.Blocks());
  if (ckpt.kind != ModelKind::kMf) AddBlocks(sections, "mlp.", model.mlp.Blocks());
  if (ckpt.kind == ModelKind::kFusion) {
    AddBlocks(sections, "fusion.", model.HeadBlocks());
  }
  out.write(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, kVersion);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.kind));
  Put<double>(out, ckpt.model.gamma);
  Put<double>(out, ckpt.model.global_mean_raw);
  PutKeys(out, ckpt.users);
  PutKeys(out, ckpt.products);
  Put<std::uint64_t>(out, sections.size());
  for (const auto& [tag, m] : sections) {
    PutString(out, tag);
    Put<std::uint64_t>(out, m->rows());
    Put<std::uint64_t>(out, m->cols());
    const auto v = m->values();
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint");
}

void SaveCheckpointFile(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  SaveCheckpoint(ckpt, out);
  out.flush();
  if (!out) throw IoError("failed writing " + path);
}

Checkpoint LoadCheckpoint(std::istream& in) {
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a checkpoint file");
  }
  const auto version = Get<std::uint32_t>(in);
  if (version != kVersion) {
    throw ParseError("unsupported checkpoint version " +
                     std::to_string(version));
  }
  Checkpoint ckpt;
  const auto kind = Get<std::uint32_t>(in);
  if (kind < 1 || kind > 3) throw ParseError("unknown checkpoint kind");
  ckpt.kind = static_cast<ModelKind>(kind);
  ckpt.model.gamma = Get<double>(in);
  ckpt.model.global_mean_raw = Get<double>(in);
  ckpt.users = GetKeys(in);
  ckpt.products = GetKeys(in);
  const auto n_sections = Get<std::uint64_t>(in);
  if (n_sections > 4096) throw ParseError("checkpoint section count corrupt");
  std::map<std::string, DenseMatrix> sections;
  for (std::uint64_t s = 0; s < n_sections; ++s) {
    std::string tag = GetString(in);
    const auto rows = Get<std::uint64_t>(in);
    const auto cols = Get<std::uint64_t>(in);
    if (rows > kMaxElements || cols > kMaxElements ||
        (rows != 0 && cols > kMaxElements / rows)) {
      throw ParseError("checkpoint section " + tag + " has corrupt dims");
    }
    DenseMatrix m(rows, cols);
    auto v = m.values();
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw ParseError("checkpoint truncated in section " + tag);
    if (!sections.emplace(std::move(tag), std::move(m)).second) {
      throw ParseError("duplicate checkpoint section");
    }
  }
  if (ckpt.kind != ModelKind::kMlp) FillBlocks(sections, "mf.", ckpt.model.mf.Blocks());
  if (ckpt.kind != ModelKind::kMf) LoadMlp(sections, ckpt.model.mlp);
  if (ckpt.kind == ModelKind::kFusion) {
    FillBlocks(sections, "fusion.", ckpt.model.HeadBlocks());
  }
  if (!sections.empty()) {
    throw ParseError("unexpected checkpoint section " + sections.begin()->first);
  }
  const std::size_t n = ckpt.kind == ModelKind::kMlp ? ckpt.model.mlp.n_users()
                                                     : ckpt.model.mf.n_users();
  const std::size_t m = ckpt.kind == ModelKind::kMlp
                            ? ckpt.model.mlp.n_products()
                            : ckpt.model.mf.n_products();
  if (n != ckpt.users.size() || m != ckpt.products.size()) {
    throw ParseError("checkpoint key maps do not match parameter dims");
  }
  return ckpt;
}

Checkpoint LoadCheckpointFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("checkpoint not found: " + path);
  return LoadCheckpoint(in);
}

double PredictIndices(const Checkpoint& ckpt, Index user, Index product) {
  const double fallback = std::clamp(ckpt.model.global_mean_raw, 1.0, 5.0);
  if (user >= ckpt.users.size() || product >= ckpt.products.size()) {
    return fallback;
  }
  switch (ckpt.kind) {
    case ModelKind::kMf:
      return std::clamp(MfPretrainPredict(ckpt.model.mf, user, product), 1.0,
                        5.0);
    case ModelKind::kMlp:
      return std::clamp(MlpPretrainPredict(ckpt.model.mlp, user, product), 1.0,
                        5.0);
    case ModelKind::kFusion:
      return FusedForward(ckpt.model, user, product);
  }
  return fallback;
}

double PredictKeys(const Checkpoint& ckpt, std::string_view user_key,
                   std::string_view product_key) {
  const auto u = ckpt.users.Find(user_key);
  const auto p = ckpt.products.Find(product_key);
  if (!u || !p) return std::clamp(ckpt.model.global_mean_raw, 1.0, 5.0);
  return PredictIndices(ckpt, *u, *p);
}

}  // namespace fdmf
