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

#ifndef FUSIONDEEPMF_MLP_MODEL_HPP_
#define FUSIONDEEPMF_MLP_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "fusiondeepmf/ingest.hpp"
#include "fusiondeepmf/linalg.hpp"
#include "fusiondeepmf/params.hpp"

namespace fdmf {

// Non-linear branch. Embedding tables hold one row per entity. Tower layer l
// maps T_{l-1} -> T_l with weight stored as T_l x T_{l-1} (row = output
// unit); T_0 = 2K is the concatenation [a_i ; b_j].
struct MlpParams {
  DenseMatrix user_rating_emb;   // n x K
  DenseMatrix user_rel_emb;      // n x K
  DenseMatrix prod_rating_emb;   // m x K
  DenseMatrix prod_rel_emb;      // m x K
  DenseMatrix fusion_user;       // K x K
  DenseMatrix fusion_user_bias;  // 1 x K
  DenseMatrix fusion_prod;       // K x K
  DenseMatrix fusion_prod_bias;  // 1 x K
  std::vector<DenseMatrix> tower_weights;
  std::vector<DenseMatrix> tower_biases;  // 1 x T_l each
  DenseMatrix head;  // p x p
  DenseMatrix reg;   // 1 x p
  DenseMatrix bias;  // 1 x 1

  std::size_t n_users() const { return user_rating_emb.rows(); }
  std::size_t n_products() const { return prod_rating_emb.rows(); }
  std::size_t latent_dim() const { return user_rating_emb.cols(); }
  std::size_t predictive_dim() const { return head.rows(); }
  std::vector<std::size_t> TowerWidths() const;

  BlockList Blocks();
  BlockList ThetaBlocks();  // everything except head, reg, bias

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

MlpParams ZerosLike(const MlpParams& params);

// Hidden widths T_1..T_L; each must be >= 1, non-increasing, and T_1 <= 2K.
// The last width is the predictive-factor dimension p.
void ValidateTower(std::size_t latent_dim,
                   const std::vector<std::size_t>& widths);

// Halving tower that starts at 2K: for K = 256 this is 512, 256, 128, 64.
std::vector<std::size_t> DefaultTower(std::size_t latent_dim);

// kSmall draws every weight from Normal(0, 0.01). At that scale the chain of
// embedding, fusion, tower and head weights leaves the deep gradients far
// below Adam's epsilon and the branch never leaves the constant predictor, so
// kScaled (the default) keeps 0.01 for the embedding tables and the head but
// draws fusion and tower weights from Normal(0, sqrt(2 / fan_in)).
enum class MlpInit { kScaled, kSmall };

const char* MlpInitName(MlpInit init);
MlpInit ParseMlpInit(const std::string& name);

// Biases start at 0.
MlpParams InitMlp(std::size_t n, std::size_t m, std::size_t latent_dim,
                  const std::vector<std::size_t>& widths, std::uint64_t seed,
                  MlpInit init = MlpInit::kScaled);

// Replaces the embedding tables with truncated-SVD factors of R (rating
// tables) and H (reliability tables).
void SeedEmbeddingsFromSvd(MlpParams& params, const InteractionStore& store);

// Intermediate values of one forward pass, reused by the backward pass.
struct MlpCache {
  Index user = 0;
  Index product = 0;
  std::vector<double> user_sum;
  std::vector<double> prod_sum;
  std::vector<double> a_pre;
  std::vector<double> b_pre;
  // layer_inputs[0] = [a ; b]; layer_inputs[l] = output of layer l.
  std::vector<std::vector<double>> layer_inputs;
  std::vector<std::vector<double>> layer_pre;
  std::vector<double> hidden;  // W_h^T theta
  double pred_normalized = 0.0;

  const std::vector<double>& theta() const { return layer_inputs.back(); }
};

// a_i and b_j after the addition + fully-connected + ReLU fusion layer.
std::pair<std::vector<double>, std::vector<double>> FusionLayer(
    const MlpParams& params, Index user, Index product);

std::vector<double> MlpForward(const MlpParams& params, Index user,
                               Index product, MlpCache* cache = nullptr);

// Accumulates gradients given d(loss)/d(theta).
void MlpThetaBackward(const MlpParams& params, const MlpCache& cache,
                      std::span<const double> dtheta, MlpParams& grads);

// Fills the cache through the regression head.
double MlpHeadForward(const MlpParams& params, Index user, Index product,
                      MlpCache& cache);

// Accumulates gradients for all fields given d(loss)/d(normalized
// prediction). The cache must come from MlpHeadForward.
void MlpBackward(const MlpParams& params, const MlpCache& cache,
                 double loss_grad, MlpParams& grads);

double MlpPretrainPredict(const MlpParams& params, Index user, Index product);

struct MlpHyperparams {
  std::size_t latent_dim = 256;
  std::vector<std::size_t> tower = {512, 256, 128, 64};
  std::size_t batch_size = 512;
  std::size_t epochs = 12;
  double lr = 0.001;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  bool svd_embeddings = false;  // seed embedding tables from SVD factors
  MlpInit init = MlpInit::kScaled;
};

// Mini-batch Adam under MAE against raw ratings.
MlpParams TrainMlp(const InteractionStore& train, const MlpHyperparams& hyper,
                   const InteractionStore* validation = nullptr,
                   TrainLog* log = nullptr);

// Continues training from `params` (used by tests and by callers that seed
// the embeddings from other factors).
void TrainMlpFrom(MlpParams& params, const InteractionStore& train,
                  const MlpHyperparams& hyper,
                  const InteractionStore* validation = nullptr,
                  TrainLog* log = nullptr);

}  // namespace fdmf

#endif  // FUSIONDEEPMF_MLP_MODEL_HPP_
