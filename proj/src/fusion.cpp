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

#include "fusiondeepmf/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fusiondeepmf/errors.hpp"
#include "fusiondeepmf/rng.hpp"

namespace fdmf {

BlockList FusionModel::HeadBlocks() {
  return {{"w_h", &w_h}, {"w_re", &w_re}, {"b_re", &b_re}};
}

BlockList FusionModel::TrainableBlocks(bool freeze_branches) {
  BlockList blocks = HeadBlocks();
  if (freeze_branches) return blocks;
  for (auto& b : mf.ThetaBlocks()) blocks.push_back({"mf." + b.name, b.matrix});
  for (auto& b : mlp.ThetaBlocks()) {
    blocks.push_back({"mlp." + b.name, b.matrix});
  }
  return blocks;
}

FusionModel ZerosLike(const FusionModel& model) {
  FusionModel out;
  out.mf = ZerosLike(model.mf);
  out.mlp = ZerosLike(model.mlp);
  out.w_h = DenseMatrix(model.w_h.rows(), model.w_h.cols());
  out.w_re = DenseMatrix(model.w_re.rows(), model.w_re.cols());
  out.b_re = DenseMatrix(1, 1);
  out.gamma = model.gamma;
  out.global_mean_raw = model.global_mean_raw;
  return out;
}

FusionModel InitFusion(const MfParams& mf, const MlpParams& mlp, double gamma,
                       double global_mean_raw) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidArgument("gamma " + std::to_string(gamma) + " outside [0, 1]");
  }
  const std::size_t k = mf.latent_dim();
  const std::size_t p = mf.predictive_dim();
  if (mlp.predictive_dim() != p || mlp.reg.cols() != p || mf.reg.cols() != p) {
    throw InvalidArgument("branch heads disagree on the predictive dimension (" +
                          std::to_string(p) + " vs " +
                          std::to_string(mlp.predictive_dim()) + ")");
  }
  if (mf.n_users() != mlp.n_users() || mf.n_products() != mlp.n_products()) {
    throw InvalidArgument("branches were trained on different key spaces");
  }
  FusionModel model;
  model.mf = mf;
  model.mlp = mlp;
  model.gamma = gamma;
  model.global_mean_raw = global_mean_raw;
  model.w_h = DenseMatrix(p, k + p);
  for (std::size_t q = 0; q < p; ++q) {
    for (std::size_t c = 0; c < k; ++c) model.w_h(q, c) = gamma * mf.head(c, q);
    for (std::size_t c = 0; c < p; ++c) {
      model.w_h(q, k + c) = (1.0 - gamma) * mlp.head(c, q);
    }
  }
  model.w_re = DenseMatrix(1, p);
  for (std::size_t q = 0; q < p; ++q) {
    model.w_re(0, q) = 0.5 * (mf.reg(0, q) + mlp.reg(0, q));
  }
  model.b_re = DenseMatrix(1, 1, 0.5 * (mf.bias(0, 0) + mlp.bias(0, 0)));
  return model;
}

FusionModel InitFusionRandom(std::size_t n, std::size_t m,
                             std::size_t latent_dim,
                             const std::vector<std::size_t>& tower,
                             double global_mean_raw, std::uint64_t seed,
                             MlpInit init) {
  ValidateTower(latent_dim, tower);
  const std::size_t k = latent_dim;
  const std::size_t p = tower.back();
  FusionModel model;
  model.mf = MakeMfParams(n, m, k, p);
  model.mlp = InitMlp(n, m, k, tower, DeriveSeed(seed, "fusion-random-mlp"),
                      init);
  Rng rng(DeriveSeed(seed, "fusion-random-mf"));
  for (auto& b : model.mf.Blocks()) b.matrix->FillNormal(rng, 0.0, 0.01);
  model.w_h = DenseMatrix(p, k + p);
  model.w_re = DenseMatrix(1, p);
  model.w_h.FillNormal(rng, 0.0, 0.01);
  model.w_re.FillNormal(rng, 0.0, 0.01);
  model.b_re = DenseMatrix(1, 1, global_mean_raw / 5.0);
  model.mf.bias(0, 0) = global_mean_raw / 5.0;
  model.mlp.bias(0, 0) = global_mean_raw / 5.0;
  model.gamma = 0.5;
  model.global_mean_raw = global_mean_raw;
  return model;
}

double FusedForwardNormalized(const FusionModel& model, Index user,
                              Index product, FusionCache* cache) {
  FusionCache local;
  FusionCache& c = cache != nullptr ? *cache : local;
  c.theta_mf = ThetaMf(model.mf, user, product);
  MlpForward(model.mlp, user, product, &c.mlp);
  const auto& theta_mlp = c.mlp.theta();
  const std::size_t k = c.theta_mf.size();
  const std::size_t p = model.w_h.rows();
  c.fused.assign(p, 0.0);
  for (std::size_t q = 0; q < p; ++q) {
    auto row = model.w_h.row(q);
    double s = 0.0;
    for (std::size_t a = 0; a < k; ++a) s += row[a] * c.theta_mf[a];
    for (std::size_t a = 0; a < theta_mlp.size(); ++a)
      s += row[k + a] * theta_mlp[a];
    c.fused[q] = s;
  }
  c.pred_normalized = Dot(model.w_re.row(0), c.fused) + model.b_re(0, 0);
  return c.pred_normalized;
}

double FusedForward(const FusionModel& model, Index user, Index product) {
  return std::clamp(5.0 * FusedForwardNormalized(model, user, product), 1.0,
                    5.0);
}

void FusedBackward(const FusionModel& model, Index user, Index product,
                   const FusionCache& cache, double loss_grad,
                   FusionModel& grads, bool freeze_branches) {
  const std::size_t k = cache.theta_mf.size();
  const std::size_t p = model.w_h.rows();
  const auto& theta_mlp = cache.mlp.theta();
  grads.b_re(0, 0) += loss_grad;
  std::vector<double> dfused(p);
  for (std::size_t q = 0; q < p; ++q) {
    grads.w_re(0, q) += loss_grad * cache.fused[q];
    dfused[q] = loss_grad * model.w_re(0, q);
  }
  std::vector<double> dtheta_mf(k, 0.0);
  std::vector<double> dtheta_mlp(theta_mlp.size(), 0.0);
  for (std::size_t q = 0; q < p; ++q) {
    if (dfused[q] == 0.0) continue;
    auto g = grads.w_h.row(q);
    auto w = model.w_h.row(q);
    for (std::size_t a = 0; a < k; ++a) {
      g[a] += dfused[q] * cache.theta_mf[a];
      dtheta_mf[a] += dfused[q] * w[a];
    }
    for (std::size_t a = 0; a < theta_mlp.size(); ++a) {
      g[k + a] += dfused[q] * theta_mlp[a];
      dtheta_mlp[a] += dfused[q] * w[k + a];
    }
  }
  if (freeze_branches) return;
  ThetaMfBackward(model.mf, user, product, dtheta_mf, grads.mf);
  MlpThetaBackward(model.mlp, cache.mlp, dtheta_mlp, grads.mlp);
}

void TrainFusion(FusionModel& model, const InteractionStore& train,
                 const FusionHyperparams& hyper,
                 const InteractionStore* validation, TrainLog* log) {
  const auto& ratings = train.ratings();
  if (ratings.empty()) throw InvalidArgument("TrainFusion: empty store");
  if (model.n_users() != train.n_users() ||
      model.n_products() != train.n_products()) {
    throw InvalidArgument("TrainFusion: model does not match store");
  }
  FusionModel grads = ZerosLike(model);
  BlockList pblocks = model.TrainableBlocks(hyper.freeze_branches);
  BlockList gblocks = grads.TrainableBlocks(hyper.freeze_branches);
  BlockAdam opt(pblocks, AdamConfig{hyper.lr});
  EarlyStopper stopper(pblocks, hyper.patience);
  Rng rng(DeriveSeed(hyper.seed, "fusion-batches"));
  std::vector<std::size_t> order(ratings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::max<std::size_t>(hyper.batch_size, 1);
  FusionCache cache;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    Stopwatch clock;
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    for (std::size_t start = 0; start < ratings.size(); start += batch) {
      const std::size_t end = std::min(ratings.size(), start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      ZeroBlocks(gblocks);
      for (std::size_t b = start; b < end; ++b) {
        const auto& r = ratings[order[b]];
        const double pred =
            FusedForwardNormalized(model, r.user, r.product, &cache);
        const double residual = 5.0 * pred - r.raw;
        loss += std::abs(residual);
        const double sign =
            residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
        FusedBackward(model, r.user, r.product, cache, 5.0 * sign * scale,
                      grads, hyper.freeze_branches);
      }
      opt.Step(gblocks);
    }
    loss /= static_cast<double>(ratings.size());
    if (!std::isfinite(loss)) {
      throw Diverged("fusion phase diverged at epoch " +
                     std::to_string(epoch + 1));
    }
    EpochLog entry{"fusion", epoch, loss};
    bool stop = false;
    if (validation != nullptr && !validation->ratings().empty()) {
      double total = 0.0;
      for (const auto& r : validation->ratings()) {
        total += std::abs(FusedForward(model, r.user, r.product) - r.raw);
      }
      entry.val_mae = total / static_cast<double>(validation->ratings().size());
      stop = stopper.Observe(entry.val_mae);
    }
    entry.seconds = clock.Seconds();
    if (log != nullptr) log->epochs.push_back(entry);
    if (stop) break;
  }
  if (validation != nullptr) stopper.RestoreBest();
}

std::vector<double> PredictBatch(const FusionModel& model,
                                 std::span<const PairRequest> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  const double fallback = std::clamp(model.global_mean_raw, 1.0, 5.0);
  for (const auto& pr : pairs) {
    if (!pr.user || !pr.product || *pr.user >= model.n_users() ||
        *pr.product >= model.n_products()) {
      out.push_back(fallback);
      continue;
    }
    out.push_back(FusedForward(model, *pr.user, *pr.product));
  }
  return out;
}

}  // namespace fdmf
