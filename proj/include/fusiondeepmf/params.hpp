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

#ifndef FUSIONDEEPMF_PARAMS_HPP_
#define FUSIONDEEPMF_PARAMS_HPP_

#include <chrono>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fusiondeepmf/linalg.hpp"

namespace fdmf {

// A named view of one parameter matrix. Parameter structs expose their
// matrices as ordered block lists; the order is the checkpoint order.
struct NamedBlock {
  std::string name;
  DenseMatrix* matrix = nullptr;
};
using BlockList = std::vector<NamedBlock>;

std::size_t TotalSize(const BlockList& blocks);
std::vector<double> Flatten(const BlockList& blocks);
void Assign(const BlockList& blocks, std::span<const double> flat);
void ZeroBlocks(const BlockList& blocks);
bool AllFinite(const BlockList& blocks);

// Adam over a fixed list of blocks, one moment buffer per block.
class BlockAdam {
 public:
  BlockAdam(const BlockList& params, AdamConfig config);

  // grads must list matrices shaped like the params, in the same order.
  void Step(const BlockList& grads);

 private:
  BlockList params_;
  std::vector<AdamState> states_;
};

struct EpochLog {
  std::string phase;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mae = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
};

// Tracks the best validation score and the parameters that produced it.
class EarlyStopper {
 public:
  EarlyStopper(const BlockList& params, std::size_t patience);

  // Returns true when training should stop.
  bool Observe(double val_mae);
  // Restores the best snapshot, if any epoch was observed.
  void RestoreBest();

 private:
  BlockList params_;
  std::size_t patience_;
  std::size_t bad_epochs_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  std::vector<double> snapshot_;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace fdmf

#endif  // FUSIONDEEPMF_PARAMS_HPP_
