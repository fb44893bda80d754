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

#ifndef FUSIONDEEPMF_CHECKPOINT_HPP_
#define FUSIONDEEPMF_CHECKPOINT_HPP_

#include <iosfwd>
#include <string>
#include <string_view>

#include "fusiondeepmf/fusion.hpp"
#include "fusiondeepmf/ingest.hpp"

namespace fdmf {

enum class ModelKind { kMf = 1, kMlp = 2, kFusion = 3 };

const char* ModelKindName(ModelKind kind);

// A trained model plus the key maps it was trained against. For kMf only
// model.mf is meaningful, for kMlp only model.mlp.
struct Checkpoint {
  ModelKind kind = ModelKind::kFusion;
  KeyIndex users;
  KeyIndex products;
  FusionModel model;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Binary container, little-endian:
//   "FDMFCKPT" u32 version u32 kind f64 gamma f64 global_mean_raw
//   u64 n_users {u32 len, bytes}...  u64 n_products {u32 len, bytes}...
//   u64 n_sections then per section {u32 len, tag, u64 rows, u64 cols,
//   rows*cols f64}
// Sections are tagged "mf.<block>", "mlp.<block>" and "fusion.<block>" in
// the fixed block order of each parameter struct.
void SaveCheckpoint(const Checkpoint& ckpt, std::ostream& out);
void SaveCheckpointFile(const Checkpoint& ckpt, const std::string& path);
Checkpoint LoadCheckpoint(std::istream& in);
Checkpoint LoadCheckpointFile(const std::string& path);

// Raw-scale prediction clamped to [1, 5] using whichever head the kind
// selects. Unknown keys fall back to the training mean.
double PredictKeys(const Checkpoint& ckpt, std::string_view user_key,
                   std::string_view product_key);
double PredictIndices(const Checkpoint& ckpt, Index user, Index product);

}  // namespace fdmf

#endif  // FUSIONDEEPMF_CHECKPOINT_HPP_
