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

#include "fusiondeepmf/mlp_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fusiondeepmf/errors.hpp"
#include "fusiondeepmf/mf_model.hpp"
#include "fusiondeepmf/rng.hpp"

namespace fdmf {

std::vector<std::size_t> MlpParams::TowerWidths() const {
  std::vector<std::size_t> widths;
  for (const auto& w : tower_weights) widths.push_back(w.rows());
  return widths;
}

BlockList MlpParams::Blocks() {
  BlockList blocks = ThetaBlocks();
  blocks.push_back({"head", &head});
  blocks.push_back({"reg", &reg});
  blocks.push_back({"bias", &bias});
  return blocks;
}

BlockList MlpParams::ThetaBlocks() {
  BlockList blocks = {{"user_rating_emb", &user_rating_emb},
                      {"user_rel_emb", &user_rel_emb},
                      {"prod_rating_emb", &prod_rating_emb},
                      {"prod_rel_emb", &prod_rel_emb},
                      {"fusion_user", &fusion_user},
                      {"fusion_user_bias", &fusion_user_bias},
                      {"fusion_prod", &fusion_prod},
                      {"fusion_prod_bias", &fusion_prod_bias}};
  for (std::size_t l = 0; l < tower_weights.size(); ++l) {
    blocks.push_back({"tower_w" + std::to_string(l), &tower_weights[l]});
    blocks.push_back({"tower_b" + std::to_string(l), &tower_biases[l]});
  }
  return blocks;
}

MlpParams ZerosLike(const MlpParams& params) {
  MlpParams out;
  auto zero = [](const DenseMatrix& m) {
    return DenseMatrix(m.rows(), m.cols());
  };
  out.user_rating_emb = zero(params.user_rating_emb);
  out.user_rel_emb = zero(params.user_rel_emb);
  out.prod_rating_emb = zero(params.prod_rating_emb);
  out.prod_rel_emb = zero(params.prod_rel_emb);
  out.fusion_user = zero(params.fusion_user);
  out.fusion_user_bias = zero(params.fusion_user_bias);
  out.fusion_prod = zero(params.fusion_prod);
  out.fusion_prod_bias = zero(params.fusion_prod_bias);
  for (const auto& w : params.tower_weights) out.tower_weights.push_back(zero(w));
  for (const auto& b : params.tower_biases) out.tower_biases.push_back(zero(b));
  out.head = zero(params.head);
  out.reg = zero(params.reg);
  out.bias = zero(params.bias);
  return out;
}

void ValidateTower(std::size_t latent_dim,
                   const std::vector<std::size_t>& widths) {
  if (latent_dim == 0) throw InvalidArgument("latent dimension must be >= 1");
  if (widths.empty()) throw InvalidArgument("tower needs at least one layer");
  std::size_t previous = 2 * latent_dim;
  for (std::size_t w : widths) {
    if (w == 0) throw InvalidArgument("tower widths must be >= 1");
    if (w > previous) {
      throw InvalidArgument("tower widths must be non-increasing from 2K = " +
                            std::to_string(2 * latent_dim));
    }
    previous = w;
  }
}

std::vector<std::size_t> DefaultTower(std::size_t latent_dim) {
  std::vector<std::size_t> widths;
  std::size_t w = 2 * latent_dim;
  for (int l = 0; l < 4; ++l) {
    widths.push_back(std::max<std::size_t>(w, 1));
    w /= 2;
  }
  return widths;
}

const char* MlpInitName(MlpInit init) {
  return init == MlpInit::kSmall ? "small" : "scaled";
}

MlpInit ParseMlpInit(const std::string& name) {
  if (name == "scaled") return MlpInit::kScaled;
  if (name == "small") return MlpInit::kSmall;
  throw InvalidArgument("unknown MLP init '" + name + "' (scaled|small)");
}

MlpParams InitMlp(std::size_t n, std::size_t m, std::size_t latent_dim,
                  const std::vector<std::size_t>& widths, std::uint64_t seed,
                  MlpInit init) {
  ValidateTower(latent_dim, widths);
  const std::size_t k = latent_dim;
  const std::size_t p = widths.back();
  Rng rng(DeriveSeed(seed, "mlp-init"));
  MlpParams out;
  out.user_rating_emb = DenseMatrix(n, k);
  out.user_rel_emb = DenseMatrix(n, k);
  out.prod_rating_emb = DenseMatrix(m, k);
  out.prod_rel_emb = DenseMatrix(m, k);
  out.fusion_user = DenseMatrix(k, k);
  out.fusion_user_bias = DenseMatrix(1, k);
  out.fusion_prod = DenseMatrix(k, k);
  out.fusion_prod_bias = DenseMatrix(1, k);
  std::size_t in = 2 * k;
  for (std::size_t w : widths) {
    out.tower_weights.emplace_back(w, in);
    out.tower_biases.emplace_back(1, w);
    in = w;
  }
  out.head = DenseMatrix(p, p);
  out.reg = DenseMatrix(1, p);
  out.bias = DenseMatrix(1, 1);
  auto dense = [&](DenseMatrix& w) {
    const double sd = init == MlpInit::kSmall
                          ? 0.01
                          : std::sqrt(2.0 / static_cast<double>(w.cols()));
    w.FillNormal(rng, 0.0, sd);
  };
  for (DenseMatrix* mat : {&out.user_rating_emb, &out.user_rel_emb,
                           &out.prod_rating_emb, &out.prod_rel_emb}) {
    mat->FillNormal(rng, 0.0, 0.01);
  }
  dense(out.fusion_user);
  dense(out.fusion_prod);
  for (auto& w : out.tower_weights) dense(w);
  out.head.FillNormal(rng, 0.0, 0.01);
  out.reg.FillNormal(rng, 0.0, 0.01);
  return out;
}

void SeedEmbeddingsFromSvd(MlpParams& params, const InteractionStore& store) {
  const std::size_t n = params.n_users();
  const std::size_t m = params.n_products();
  const std::size_t k = params.latent_dim();
  SvdFactors rating = SvdInit(n, m, store.ratings(), k);
  SvdFactors rel = SvdInit(n, m, store.reliability(), k);
  params.user_rating_emb = std::move(rating.users);
  params.prod_rating_emb = std::move(rating.products);
  params.user_rel_emb = std::move(rel.users);
  params.prod_rel_emb = std::move(rel.products);
}

namespace {

void FusionSide(const DenseMatrix& rating_emb, const DenseMatrix& rel_emb,
                const DenseMatrix& weight, const DenseMatrix& bias, Index row,
                std::vector<double>& sum, std::vector<double>& pre,
                std::vector<double>& out) {
  const std::size_t k = rating_emb.cols();
  sum.resize(k);
  pre.resize(k);
  out.resize(k);
  auto r = rating_emb.row(row);
  auto v = rel_emb.row(row);
  for (std::size_t c = 0; c < k; ++c) sum[c] = r[c] + v[c];
  MatVec(weight, sum, pre);
  for (std::size_t c = 0; c < k; ++c) {
    pre[c] += bias(0, c);
    out[c] = Relu(pre[c]);
  }
}

void CheckIndex(const MlpParams& params, Index user, Index product) {
  if (user >= params.n_users() || product >= params.n_products()) {
    throw InvalidArgument("MLP: index out of range");
  }
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> FusionLayer(
    const MlpParams& params, Index user, Index product) {
  CheckIndex(params, user, product);
  std::vector<double> sum;
  std::vector<double> pre;
  std::vector<double> a;
  std::vector<double> b;
  FusionSide(params.user_rating_emb, params.user_rel_emb, params.fusion_user,
             params.fusion_user_bias, user, sum, pre, a);
  FusionSide(params.prod_rating_emb, params.prod_rel_emb, params.fusion_prod,
             params.fusion_prod_bias, product, sum, pre, b);
  return {std::move(a), std::move(b)};
}

std::vector<double> MlpForward(const MlpParams& params, Index user,
                               Index product, MlpCache* cache) {
  CheckIndex(params, user, product);
  MlpCache local;
  MlpCache& c = cache != nullptr ? *cache : local;
  const std::size_t k = params.latent_dim();
  c.user = user;
  c.product = product;
  std::vector<double> a;
  std::vector<double> b;
  FusionSide(params.user_rating_emb, params.user_rel_emb, params.fusion_user,
             params.fusion_user_bias, user, c.user_sum, c.a_pre, a);
  FusionSide(params.prod_rating_emb, params.prod_rel_emb, params.fusion_prod,
             params.fusion_prod_bias, product, c.prod_sum, c.b_pre, b);
  const std::size_t layers = params.tower_weights.size();
  c.layer_inputs.resize(layers + 1);
  c.layer_pre.resize(layers);
  auto& v = c.layer_inputs[0];
  v.resize(2 * k);
  std::copy(a.begin(), a.end(), v.begin());
  std::copy(b.begin(), b.end(), v.begin() + static_cast<std::ptrdiff_t>(k));
  for (std::size_t l = 0; l < layers; ++l) {
    const DenseMatrix& w = params.tower_weights[l];
    auto& pre = c.layer_pre[l];
    auto& out = c.layer_inputs[l + 1];
    pre.resize(w.rows());
    out.resize(w.rows());
    MatVec(w, c.layer_inputs[l], pre);
    for (std::size_t u = 0; u < w.rows(); ++u) {
      pre[u] += params.tower_biases[l](0, u);
      out[u] = Relu(pre[u]);
    }
  }
  return c.theta();
}

void MlpThetaBackward(const MlpParams& params, const MlpCache& cache,
                      std::span<const double> dtheta, MlpParams& grads) {
  const std::size_t k = params.latent_dim();
  std::vector<double> dout(dtheta.begin(), dtheta.end());
  for (std::size_t l = params.tower_weights.size(); l-- > 0;) {
    const DenseMatrix& w = params.tower_weights[l];
    const auto& input = cache.layer_inputs[l];
    const auto& pre = cache.layer_pre[l];
    std::vector<double> dpre(w.rows());
    for (std::size_t u = 0; u < w.rows(); ++u) {
      dpre[u] = dout[u] * ReluGrad(pre[u]);
      grads.tower_biases[l](0, u) += dpre[u];
      if (dpre[u] == 0.0) continue;
      auto gw = grads.tower_weights[l].row(u);
      for (std::size_t c = 0; c < input.size(); ++c) gw[c] += dpre[u] * input[c];
    }
    std::vector<double> din(w.cols());
    MatTVec(w, dpre, din);
    dout = std::move(din);
  }
  // dout is now d/dV with V = [a ; b].
  auto side = [&](std::size_t offset, const std::vector<double>& pre,
                  const std::vector<double>& sum, const DenseMatrix& weight,
                  DenseMatrix& gweight, DenseMatrix& gbias, DenseMatrix& gemb1,
                  DenseMatrix& gemb2, Index row) {
    std::vector<double> dpre(k);
    for (std::size_t c = 0; c < k; ++c) {
      dpre[c] = dout[offset + c] * ReluGrad(pre[c]);
      gbias(0, c) += dpre[c];
      if (dpre[c] == 0.0) continue;
      auto gw = gweight.row(c);
      for (std::size_t d = 0; d < k; ++d) gw[d] += dpre[c] * sum[d];
    }
    std::vector<double> dsum(k);
    MatTVec(weight, dpre, dsum);
    auto g1 = gemb1.row(row);
    auto g2 = gemb2.row(row);
    for (std::size_t c = 0; c < k; ++c) {
      g1[c] += dsum[c];
      g2[c] += dsum[c];
    }
  };
  side(0, cache.a_pre, cache.user_sum, params.fusion_user, grads.fusion_user,
       grads.fusion_user_bias, grads.user_rating_emb, grads.user_rel_emb,
       cache.user);
  side(k, cache.b_pre, cache.prod_sum, params.fusion_prod, grads.fusion_prod,
       grads.fusion_prod_bias, grads.prod_rating_emb, grads.prod_rel_emb,
       cache.product);
}

double MlpHeadForward(const MlpParams& params, Index user, Index product,
                      MlpCache& cache) {
  MlpForward(params, user, product, &cache);
  cache.hidden.resize(params.predictive_dim());
  MatTVec(params.head, cache.theta(), cache.hidden);
  cache.pred_normalized = Dot(params.reg.row(0), cache.hidden) + params.bias(0, 0);
  return cache.pred_normalized;
}

void MlpBackward(const MlpParams& params, const MlpCache& cache,
                 double loss_grad, MlpParams& grads) {
  const std::size_t p = params.predictive_dim();
  const auto& theta = cache.theta();
  grads.bias(0, 0) += loss_grad;
  std::vector<double> dhidden(p);
  for (std::size_t q = 0; q < p; ++q) {
    grads.reg(0, q) += loss_grad * cache.hidden[q];
    dhidden[q] = loss_grad * params.reg(0, q);
  }
  for (std::size_t a = 0; a < p; ++a) {
    auto gh = grads.head.row(a);
    for (std::size_t q = 0; q < p; ++q) gh[q] += theta[a] * dhidden[q];
  }
  std::vector<double> dtheta(p);
  MatVec(params.head, dhidden, dtheta);
  MlpThetaBackward(params, cache, dtheta, grads);
}

double MlpPretrainPredict(const MlpParams& params, Index user, Index product) {
  MlpCache cache;
  return 5.0 * MlpHeadForward(params, user, product, cache);
}

MlpParams TrainMlp(const InteractionStore& train, const MlpHyperparams& hyper,
                   const InteractionStore* validation, TrainLog* log) {
  MlpParams params = InitMlp(train.n_users(), train.n_products(),
                             hyper.latent_dim, hyper.tower, hyper.seed,
                             hyper.init);
  params.bias(0, 0) = train.MeanRawRating() / 5.0;
  if (hyper.svd_embeddings) SeedEmbeddingsFromSvd(params, train);
  TrainMlpFrom(params, train, hyper, validation, log);
  return params;
}

void TrainMlpFrom(MlpParams& params, const InteractionStore& train,
                  const MlpHyperparams& hyper,
                  const InteractionStore* validation, TrainLog* log) {
  const auto& ratings = train.ratings();
  if (ratings.empty()) throw InvalidArgument("TrainMlp: empty store");
  if (params.n_users() != train.n_users() ||
      params.n_products() != train.n_products()) {
    throw InvalidArgument("TrainMlp: parameters do not match store");
  }
  MlpParams grads = ZerosLike(params);
  BlockList pblocks = params.Blocks();
  BlockList gblocks = grads.Blocks();
  BlockAdam opt(pblocks, AdamConfig{hyper.lr});
  EarlyStopper stopper(pblocks, hyper.patience);
  Rng rng(DeriveSeed(hyper.seed, "mlp-batches"));
  std::vector<std::size_t> order(ratings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::max<std::size_t>(hyper.batch_size, 1);
  MlpCache cache;
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
        const double pred = MlpHeadForward(params, r.user, r.product, cache);
        const double residual = 5.0 * pred - r.raw;
        loss += std::abs(residual);
        const double sign =
            residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
        MlpBackward(params, cache, 5.0 * sign * scale, grads);
      }
      opt.Step(gblocks);
    }
    loss /= static_cast<double>(ratings.size());
    if (!std::isfinite(loss)) {
      throw Diverged("mlp phase diverged at epoch " + std::to_string(epoch + 1));
    }
    EpochLog entry{"mlp", epoch, loss};
    bool stop = false;
    if (validation != nullptr && !validation->ratings().empty()) {
      double total = 0.0;
      for (const auto& r : validation->ratings()) {
        total += std::abs(
            std::clamp(MlpPretrainPredict(params, r.user, r.product), 1.0, 5.0) -
            r.raw);
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

}  // namespace fdmf
