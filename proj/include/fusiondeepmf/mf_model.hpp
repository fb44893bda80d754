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

#ifndef FUSIONDEEPMF_MF_MODEL_HPP_
#define FUSIONDEEPMF_MF_MODEL_HPP_

#include <cstdint>
#include <vector>

#include "fusiondeepmf/ingest.hpp"
#include "fusiondeepmf/linalg.hpp"
#include "fusiondeepmf/params.hpp"

namespace fdmf {

// Linear-kernel branch. Factor matrices are stored one row per entity, so
// row i of `w` is the latent vector w_i (a column of the K x n layout).
struct MfParams {
  DenseMatrix w;            // n x K  user factors, rating objective
  DenseMatrix z;            // m x K  product factors, rating objective
  DenseMatrix e;            // n x K  user factors shared by R and H
  DenseMatrix zv;           // m x K  product factors, joint objective
  DenseMatrix f;            // m x K  product factors, reliability
  DenseMatrix proj_rating;  // K x K  applied to w_i (.) z_j
  DenseMatrix proj_joint;   // K x K  applied to e_i (.) zv_j
  DenseMatrix head;         // K x p  output projection
  DenseMatrix reg;          // 1 x p  regression weights
  DenseMatrix bias;         // 1 x 1  regression bias (normalized scale)

  std::size_t n_users() const { return w.rows(); }
  std::size_t n_products() const { return z.rows(); }
  std::size_t latent_dim() const { return w.cols(); }
  std::size_t predictive_dim() const { return head.cols(); }

  BlockList Blocks();
  BlockList FactorBlocks();      // w z e zv f
  BlockList ThetaBlocks();       // blocks that feed theta: w z e zv proj_*
  BlockList HeadBlocks();        // proj_rating proj_joint head reg bias

  friend bool operator==(const MfParams&, const MfParams&) = default;
};

MfParams ZerosLike(const MfParams& params);
MfParams MakeMfParams(std::size_t n, std::size_t m, std::size_t k,
                      std::size_t p);

struct MfHyperparams {
  std::size_t latent_dim = 256;       // K
  std::size_t predictive_dim = 64;    // p
  double lambda = 0.1;
  std::size_t batch_size = 512;
  std::size_t epochs = 12;
  double lr = 0.001;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
};

struct SvdFactors {
  DenseMatrix users;     // n x K, rows of U S^{1/2}
  DenseMatrix products;  // m x K, columns of S^{1/2} V^T
};

// Factors of a zero-imputed dense copy of the observed entries.
SvdFactors SvdInit(std::size_t n, std::size_t m,
                   std::span<const RatingEntry> ratings, std::size_t k);
SvdFactors SvdInit(std::size_t n, std::size_t m,
                   std::span<const ReliabilityEntry> reliability,
                   std::size_t k);

// Objectives over the full observation sets. The regularizers weight each
// entity by its observation count, which is the same as charging
// lambda * (|a|^2 + |b|^2) once per observed pair.
double RatingLoss(const MfParams& params, const InteractionStore& store,
                  double lambda);
double ReliabilityLoss(const MfParams& params, const InteractionStore& store,
                       double lambda);
double JointLoss(const MfParams& params, const InteractionStore& store,
                 double lambda);

// Analytic gradients of the objectives above. Only the blocks the objective
// touches are nonzero.
MfParams RatingLossGrad(const MfParams& params, const InteractionStore& store,
                        double lambda);
MfParams ReliabilityLossGrad(const MfParams& params,
                             const InteractionStore& store, double lambda);
MfParams JointLossGrad(const MfParams& params, const InteractionStore& store,
                       double lambda);

std::vector<double> ThetaMf(const MfParams& params, Index user, Index product);

// Accumulates d(loss)/d(params) given d(loss)/d(theta).
void ThetaMfBackward(const MfParams& params, Index user, Index product,
                     std::span<const double> dtheta, MfParams& grads);

// Normalized-scale prediction W_m (W_h^T theta) + b_m, and its raw-scale
// counterpart (x5, unclamped).
double MfHeadNormalized(const MfParams& params, Index user, Index product);
double MfPretrainPredict(const MfParams& params, Index user, Index product);

// Raw-scale predictions of the factor objectives themselves: 5 g(w.z) and
// 5 g(e.zv).
double RatingFactorPredict(const MfParams& params, Index user, Index product);
double JointFactorPredict(const MfParams& params, Index user, Index product);

// SVD initialization, then mini-batch Adam on the rating objective, the
// joint objective, and finally the regression head under MAE. Early
// stopping uses `validation` when given.
MfParams TrainMf(const InteractionStore& train, const MfHyperparams& hyper,
                 const InteractionStore* validation = nullptr,
                 TrainLog* log = nullptr);

}  // namespace fdmf

#endif  // FUSIONDEEPMF_MF_MODEL_HPP_
