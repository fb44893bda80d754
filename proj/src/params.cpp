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

#include "fusiondeepmf/params.hpp"

#include <algorithm>

#include "fusiondeepmf/errors.hpp"

namespace fdmf {

std::size_t TotalSize(const BlockList& blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.matrix->size();
  return n;
}

std::vector<double> Flatten(const BlockList& blocks) {
  std::vector<double> flat;
  flat.reserve(TotalSize(blocks));
  for (const auto& b : blocks) {
    auto v = b.matrix->values();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return flat;
}

void Assign(const BlockList& blocks, std::span<const double> flat) {
  if (flat.size() != TotalSize(blocks)) {
    throw InvalidArgument("Assign: flat size does not match block sizes");
  }
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    auto v = b.matrix->values();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), v.size(),
                v.begin());
    offset += v.size();
  }
}

void ZeroBlocks(const BlockList& blocks) {
  for (const auto& b : blocks) b.matrix->Fill(0.0);
}

bool AllFinite(const BlockList& blocks) {
  return std::all_of(blocks.begin(), blocks.end(), [](const NamedBlock& b) {
    return b.matrix->AllFinite();
  });
}

BlockAdam::BlockAdam(const BlockList& params, AdamConfig config)
    : params_(params) {
  states_.reserve(params_.size());
  for (const auto& b : params_) states_.emplace_back(b.matrix->size(), config);
}

void BlockAdam::Step(const BlockList& grads) {
  if (grads.size() != params_.size()) {
    throw InvalidArgument("BlockAdam: gradient block count mismatch");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    AdamStep(params_[i].matrix->values(), grads[i].matrix->values(),
             states_[i]);
  }
}

EarlyStopper::EarlyStopper(const BlockList& params, std::size_t patience)
    : params_(params), patience_(patience) {}

bool EarlyStopper::Observe(double val_mae) {
  if (val_mae < best_) {
    best_ = val_mae;
    bad_epochs_ = 0;
    snapshot_ = Flatten(params_);
    return false;
  }
  ++bad_epochs_;
  return patience_ > 0 && bad_epochs_ >= patience_;
}

void EarlyStopper::RestoreBest() {
  if (!snapshot_.empty()) Assign(params_, snapshot_);
}

}  // namespace fdmf
