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

#ifndef FUSIONDEEPMF_FUSION_HPP_
#define FUSIONDEEPMF_FUSION_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fusiondeepmf/ingest.hpp"
#include "fusiondeepmf/mf_model.hpp"
#include "fusiondeepmf/mlp_model.hpp"

namespace fdmf {

// Concatenation head over [theta_MF ; theta_MLP] plus both branches.
struct FusionModel {
  MfParams mf;
  MlpParams mlp;
  DenseMatrix w_h;   // p x (K + p)
  DenseMatrix w_re;  // 1 x p
  DenseMatrix b_re;  // 1 x 1
  double gamma = 0.5;
  double global_mean_raw = 3.0;  // cold-start fallback

  std::size_t n_users() const { return mf.n_users(); }
  std::size_t n_products() const { return mf.n_products(); }

  BlockList HeadBlocks();
  // Every parameter that influences fused_forward.
  BlockList TrainableBlocks(bool freeze_branches);

  friend bool operator==(const FusionModel&, const FusionModel&) = default;
};

FusionModel ZerosLike(const FusionModel& model);

// Assembles W_h = [gamma W_h^MF^T | (1 - gamma) W_h^MLP^T]; W_re and b_re are
// the averages of the two branch regression heads.
FusionModel InitFusion(const MfParams& mf, const MlpParams& mlp, double gamma,
                       double global_mean_raw = 3.0);

// All-random initialization (no pre-training): factors, projections and
// heads ~ Normal(0, 0.01), regression bias at the training mean.
FusionModel InitFusionRandom(std::size_t n, std::size_t m,
                             std::size_t latent_dim,
                             const std::vector<std::size_t>& tower,
                             double global_mean_raw, std::uint64_t seed,
                             MlpInit init = MlpInit::kScaled);

struct FusionCache {
  std::vector<double> theta_mf;
  MlpCache mlp;
  std::vector<double> fused;  // W_h [theta_mf ; theta_mlp]
  double pred_normalized = 0.0;
};

// Normalized-scale prediction, unclamped. Used by the losses.
double FusedForwardNormalized(const FusionModel& model, Index user,
                              Index product, FusionCache* cache = nullptr);

// Raw-scale prediction clamped to [1, 5] for reporting.
double FusedForward(const FusionModel& model, Index user, Index product);

// Accumulates gradients given d(loss)/d(normalized prediction). With
// freeze_branches only w_h, w_re and b_re receive gradient.
void FusedBackward(const FusionModel& model, Index user, Index product,
                   const FusionCache& cache, double loss_grad,
                   FusionModel& grads, bool freeze_branches = false);

struct FusionHyperparams {
  std::size_t batch_size = 512;
  std::size_t epochs = 12;
  double lr = 0.001;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  bool freeze_branches = false;
};

// End-to-end fine-tuning under MAE against raw ratings.
void TrainFusion(FusionModel& model, const InteractionStore& train,
                 const FusionHyperparams& hyper,
                 const InteractionStore* validation = nullptr,
                 TrainLog* log = nullptr);

// A (user, product) request; indices outside the model fall back to the
// global training mean.
struct PairRequest {
  std::optional<Index> user;
  std::optional<Index> product;
};

std::vector<double> PredictBatch(const FusionModel& model,
                                 std::span<const PairRequest> pairs);

}  // namespace fdmf

#endif  // FUSIONDEEPMF_FUSION_HPP_
