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

#include "fusiondeepmf/mf_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fusiondeepmf/errors.hpp"
#include "fusiondeepmf/rng.hpp"

namespace fdmf {

namespace {

double SquaredNorm(std::span<const double> v) { return Dot(v, v); }

// d/ds of (y - g(s))^2
double SquaredSigmoidResidualGrad(double y, double s) {
  const double g = Sigmoid(s);
  return -2.0 * (y - g) * g * (1.0 - g);
}

void Axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += a * x[k];
}

// One observed pair of a factor objective: (y - g(a.b))^2 plus lambda times
// the squared norms of the vectors listed as regularized. Adds scale * grad.
double FactorTerm(std::span<const double> a, std::span<const double> b,
                  double y, double lambda, bool reg_a, bool reg_b,
                  double scale, std::span<double> ga, std::span<double> gb) {
  const double s = Dot(a, b);
  const double r = y - Sigmoid(s);
  double loss = r * r;
  const double ds = SquaredSigmoidResidualGrad(y, s) * scale;
  Axpy(ds, b, ga);
  Axpy(ds, a, gb);
  if (reg_a) {
    loss += lambda * SquaredNorm(a);
    Axpy(2.0 * lambda * scale, a, ga);
  }
  if (reg_b) {
    loss += lambda * SquaredNorm(b);
    Axpy(2.0 * lambda * scale, b, gb);
  }
  return loss;
}

enum class TermKind : std::uint8_t { kRating, kReliability };

struct Term {
  Index user;
  Index product;
  double target;
  TermKind kind;
};

void CheckShapes(const MfParams& params, const InteractionStore& store) {
  if (params.w.rows() != store.n_users() ||
      params.z.rows() != store.n_products()) {
    throw InvalidArgument("MF parameters do not match store dimensions");
  }
}

SvdFactors SvdFromDense(const DenseMatrix& dense, std::size_t k) {
  const std::size_t n = dense.rows();
  const std::size_t m = dense.cols();
  SvdFactors out{DenseMatrix(n, k), DenseMatrix(m, k)};
  if (dense.SquaredNorm() == 0.0) return out;
  const SvdResult svd = TruncatedSvd(dense, k);
  for (std::size_t c = 0; c < k; ++c) {
    const double root = std::sqrt(svd.s[c]);
    for (std::size_t i = 0; i < n; ++i) out.users(i, c) = svd.u(i, c) * root;
    for (std::size_t j = 0; j < m; ++j)
      out.products(j, c) = root * svd.vt(c, j);
  }
  return out;
}

void CheckRank(std::size_t n, std::size_t m, std::size_t k) {
  if (k == 0 || k > std::min(n, m)) {
    throw InvalidArgument("latent dimension " + std::to_string(k) +
                          " must lie in [1, min(n, m) = " +
                          std::to_string(std::min(n, m)) + "]");
  }
}

double ClampRaw(double raw) { return std::clamp(raw, 1.0, 5.0); }

}  // namespace

BlockList MfParams::Blocks() {
  return {{"w", &w},
          {"z", &z},
          {"e", &e},
          {"zv", &zv},
          {"f", &f},
          {"proj_rating", &proj_rating},
          {"proj_joint", &proj_joint},
          {"head", &head},
          {"reg", &reg},
          {"bias", &bias}};
}

BlockList MfParams::FactorBlocks() {
  return {{"w", &w}, {"z", &z}, {"e", &e}, {"zv", &zv}, {"f", &f}};
}

BlockList MfParams::ThetaBlocks() {
  return {{"w", &w},
          {"z", &z},
          {"e", &e},
          {"zv", &zv},
          {"proj_rating", &proj_rating},
          {"proj_joint", &proj_joint}};
}

BlockList MfParams::HeadBlocks() {
  return {{"proj_rating", &proj_rating},
          {"proj_joint", &proj_joint},
          {"head", &head},
          {"reg", &reg},
          {"bias", &bias}};
}

MfParams MakeMfParams(std::size_t n, std::size_t m, std::size_t k,
                      std::size_t p) {
  MfParams out;
  out.w = DenseMatrix(n, k);
  out.z = DenseMatrix(m, k);
  out.e = DenseMatrix(n, k);
  out.zv = DenseMatrix(m, k);
  out.f = DenseMatrix(m, k);
  out.proj_rating = DenseMatrix(k, k);
  out.proj_joint = DenseMatrix(k, k);
  out.head = DenseMatrix(k, p);
  out.reg = DenseMatrix(1, p);
  out.bias = DenseMatrix(1, 1);
  return out;
}

MfParams ZerosLike(const MfParams& params) {
  return MakeMfParams(params.n_users(), params.n_products(),
                      params.latent_dim(), params.predictive_dim());
}

SvdFactors SvdInit(std::size_t n, std::size_t m,
                   std::span<const RatingEntry> ratings, std::size_t k) {
  CheckRank(n, m, k);
  DenseMatrix dense(n, m);
  for (const auto& r : ratings) dense(r.user, r.product) = r.value;
  return SvdFromDense(dense, k);
}

SvdFactors SvdInit(std::size_t n, std::size_t m,
                   std::span<const ReliabilityEntry> reliability,
                   std::size_t k) {
  CheckRank(n, m, k);
  DenseMatrix dense(n, m);
  for (const auto& r : reliability) dense(r.user, r.product) = r.value;
  return SvdFromDense(dense, k);
}

double RatingLoss(const MfParams& params, const InteractionStore& store,
                  double lambda) {
  CheckShapes(params, store);
  double data = 0.0;
  for (const auto& r : store.ratings()) {
    const double res =
        r.value - Sigmoid(Dot(params.w.row(r.user), params.z.row(r.product)));
    data += res * res;
  }
  double reg = 0.0;
  const auto& nu = store.user_rating_counts();
  const auto& np = store.product_rating_counts();
  for (std::size_t i = 0; i < nu.size(); ++i)
    reg += static_cast<double>(nu[i]) * SquaredNorm(params.w.row(i));
  for (std::size_t j = 0; j < np.size(); ++j)
    reg += static_cast<double>(np[j]) * SquaredNorm(params.z.row(j));
  return data + lambda * reg;
}

double ReliabilityLoss(const MfParams& params, const InteractionStore& store,
                       double lambda) {
  CheckShapes(params, store);
  double data = 0.0;
  for (const auto& r : store.reliability()) {
    const double res =
        r.value - Sigmoid(Dot(params.e.row(r.user), params.f.row(r.product)));
    data += res * res;
  }
  double reg = 0.0;
  const auto& nu = store.user_reliability_counts();
  const auto& np = store.product_reliability_counts();
  for (std::size_t i = 0; i < nu.size(); ++i)
    reg += static_cast<double>(nu[i]) * SquaredNorm(params.e.row(i));
  for (std::size_t j = 0; j < np.size(); ++j)
    reg += static_cast<double>(np[j]) * SquaredNorm(params.f.row(j));
  return data + lambda * reg;
}

double JointLoss(const MfParams& params, const InteractionStore& store,
                 double lambda) {
  CheckShapes(params, store);
  double data = 0.0;
  for (const auto& r : store.ratings()) {
    const double res =
        r.value - Sigmoid(Dot(params.e.row(r.user), params.zv.row(r.product)));
    data += res * res;
  }
  for (const auto& r : store.reliability()) {
    const double res =
        r.value - Sigmoid(Dot(params.e.row(r.user), params.f.row(r.product)));
    data += res * res;
  }
  // e is weighted by the user's rating count, the role w plays in the
  // rating-only objective.
  double reg = 0.0;
  const auto& nu = store.user_rating_counts();
  const auto& np = store.product_rating_counts();
  const auto& nf = store.product_reliability_counts();
  for (std::size_t i = 0; i < nu.size(); ++i)
    reg += static_cast<double>(nu[i]) * SquaredNorm(params.e.row(i));
  for (std::size_t j = 0; j < np.size(); ++j)
    reg += static_cast<double>(np[j]) * SquaredNorm(params.zv.row(j));
  for (std::size_t j = 0; j < nf.size(); ++j)
    reg += static_cast<double>(nf[j]) * SquaredNorm(params.f.row(j));
  return data + lambda * reg;
}

namespace {

double AccumulateTerm(const MfParams& params, const Term& t, double lambda,
                      bool joint, double scale, MfParams& grads) {
  if (!joint) {
    if (t.kind == TermKind::kRating) {
      return FactorTerm(params.w.row(t.user), params.z.row(t.product),
                        t.target, lambda, true, true, scale,
                        grads.w.row(t.user), grads.z.row(t.product));
    }
    return FactorTerm(params.e.row(t.user), params.f.row(t.product), t.target,
                      lambda, true, true, scale, grads.e.row(t.user),
                      grads.f.row(t.product));
  }
  if (t.kind == TermKind::kRating) {
    return FactorTerm(params.e.row(t.user), params.zv.row(t.product),
                      t.target, lambda, true, true, scale, grads.e.row(t.user),
                      grads.zv.row(t.product));
  }
  return FactorTerm(params.e.row(t.user), params.f.row(t.product), t.target,
                    lambda, false, true, scale, grads.e.row(t.user),
                    grads.f.row(t.product));
}

std::vector<Term> RatingTerms(const InteractionStore& store) {
  std::vector<Term> terms;
  terms.reserve(store.ratings().size());
  for (const auto& r : store.ratings())
    terms.push_back({r.user, r.product, r.value, TermKind::kRating});
  return terms;
}

std::vector<Term> ReliabilityTerms(const InteractionStore& store) {
  std::vector<Term> terms;
  terms.reserve(store.reliability().size());
  for (const auto& r : store.reliability())
    terms.push_back({r.user, r.product, r.value, TermKind::kReliability});
  return terms;
}

MfParams FullGrad(const MfParams& params, const std::vector<Term>& terms,
                  double lambda, bool joint) {
  MfParams grads = ZerosLike(params);
  for (const auto& t : terms) AccumulateTerm(params, t, lambda, joint, 1.0, grads);
  return grads;
}

}  // namespace

MfParams RatingLossGrad(const MfParams& params, const InteractionStore& store,
                        double lambda) {
  CheckShapes(params, store);
  return FullGrad(params, RatingTerms(store), lambda, false);
}

MfParams ReliabilityLossGrad(const MfParams& params,
                             const InteractionStore& store, double lambda) {
  CheckShapes(params, store);
  return FullGrad(params, ReliabilityTerms(store), lambda, false);
}

MfParams JointLossGrad(const MfParams& params, const InteractionStore& store,
                       double lambda) {
  CheckShapes(params, store);
  auto terms = RatingTerms(store);
  auto rel = ReliabilityTerms(store);
  terms.insert(terms.end(), rel.begin(), rel.end());
  return FullGrad(params, terms, lambda, true);
}

std::vector<double> ThetaMf(const MfParams& params, Index user,
                            Index product) {
  if (user >= params.n_users() || product >= params.n_products()) {
    throw InvalidArgument("ThetaMf: index out of range");
  }
  const std::size_t k = params.latent_dim();
  std::vector<double> x(k);
  std::vector<double> y(k);
  auto w = params.w.row(user);
  auto z = params.z.row(product);
  auto e = params.e.row(user);
  auto zv = params.zv.row(product);
  for (std::size_t c = 0; c < k; ++c) {
    x[c] = w[c] * z[c];
    y[c] = e[c] * zv[c];
  }
  std::vector<double> theta(k);
  std::vector<double> tmp(k);
  MatVec(params.proj_rating, x, theta);
  MatVec(params.proj_joint, y, tmp);
  for (std::size_t c = 0; c < k; ++c) theta[c] += tmp[c];
  return theta;
}

void ThetaMfBackward(const MfParams& params, Index user, Index product,
                     std::span<const double> dtheta, MfParams& grads) {
  const std::size_t k = params.latent_dim();
  auto w = params.w.row(user);
  auto z = params.z.row(product);
  auto e = params.e.row(user);
  auto zv = params.zv.row(product);
  std::vector<double> dx(k);
  std::vector<double> dy(k);
  MatTVec(params.proj_rating, dtheta, dx);
  MatTVec(params.proj_joint, dtheta, dy);
  for (std::size_t a = 0; a < k; ++a) {
    auto gr = grads.proj_rating.row(a);
    auto gj = grads.proj_joint.row(a);
    for (std::size_t b = 0; b < k; ++b) {
      gr[b] += dtheta[a] * w[b] * z[b];
      gj[b] += dtheta[a] * e[b] * zv[b];
    }
  }
  auto gw = grads.w.row(user);
  auto gz = grads.z.row(product);
  auto ge = grads.e.row(user);
  auto gzv = grads.zv.row(product);
  for (std::size_t c = 0; c < k; ++c) {
    gw[c] += dx[c] * z[c];
    gz[c] += dx[c] * w[c];
    ge[c] += dy[c] * zv[c];
    gzv[c] += dy[c] * e[c];
  }
}

double MfHeadNormalized(const MfParams& params, Index user, Index product) {
  const auto theta = ThetaMf(params, user, product);
  std::vector<double> hidden(params.predictive_dim());
  MatTVec(params.head, theta, hidden);
  return Dot(params.reg.row(0), hidden) + params.bias(0, 0);
}

double MfPretrainPredict(const MfParams& params, Index user, Index product) {
  return 5.0 * MfHeadNormalized(params, user, product);
}

double RatingFactorPredict(const MfParams& params, Index user, Index product) {
  return 5.0 * Sigmoid(Dot(params.w.row(user), params.z.row(product)));
}

double JointFactorPredict(const MfParams& params, Index user, Index product) {
  return 5.0 * Sigmoid(Dot(params.e.row(user), params.zv.row(product)));
}

namespace {

// Adds the MAE-head gradient for one pair; returns |5 * pred - raw|.
double HeadTerm(const MfParams& params, Index user, Index product, int raw,
                double scale, MfParams& grads) {
  const auto theta = ThetaMf(params, user, product);
  const std::size_t p = params.predictive_dim();
  const std::size_t k = params.latent_dim();
  std::vector<double> hidden(p);
  MatTVec(params.head, theta, hidden);
  const double pred = Dot(params.reg.row(0), hidden) + params.bias(0, 0);
  const double residual = 5.0 * pred - static_cast<double>(raw);
  const double sign = residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
  const double dpred = 5.0 * sign * scale;
  grads.bias(0, 0) += dpred;
  std::vector<double> dhidden(p);
  for (std::size_t q = 0; q < p; ++q) {
    grads.reg(0, q) += dpred * hidden[q];
    dhidden[q] = dpred * params.reg(0, q);
  }
  std::vector<double> dtheta(k);
  MatVec(params.head, dhidden, dtheta);
  for (std::size_t a = 0; a < k; ++a) {
    auto gh = grads.head.row(a);
    for (std::size_t q = 0; q < p; ++q) gh[q] += theta[a] * dhidden[q];
  }
  // Factors stay fixed in this phase; only the projection gradients are used.
  ThetaMfBackward(params, user, product, dtheta, grads);
  return std::abs(residual);
}

template <typename Predict>
double ValidationMae(const InteractionStore& val, Predict predict) {
  if (val.ratings().empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& r : val.ratings()) {
    total += std::abs(ClampRaw(predict(r.user, r.product)) - r.raw);
  }
  return total / static_cast<double>(val.ratings().size());
}

struct Batches {
  Batches(std::size_t count, std::size_t batch_size)
      : order(count), size(std::max<std::size_t>(batch_size, 1)) {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  std::vector<std::size_t> order;
  std::size_t size;
};

void CheckFinite(double loss, const std::string& phase, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw Diverged(phase + " phase diverged at epoch " +
                   std::to_string(epoch + 1) + " (loss " +
                   std::to_string(loss) + ")");
  }
}

}  // namespace

MfParams TrainMf(const InteractionStore& train, const MfHyperparams& hyper,
                 const InteractionStore* validation, TrainLog* log) {
  const std::size_t n = train.n_users();
  const std::size_t m = train.n_products();
  const std::size_t k = hyper.latent_dim;
  const std::size_t p = hyper.predictive_dim;
  if (train.ratings().empty()) throw InvalidArgument("TrainMf: empty store");
  if (p == 0) throw InvalidArgument("TrainMf: predictive dimension must be >= 1");
  if (hyper.lambda < 0.0) throw InvalidArgument("TrainMf: lambda must be >= 0");

  MfParams params = MakeMfParams(n, m, k, p);
  {
    SvdFactors rating = SvdInit(n, m, train.ratings(), k);
    SvdFactors rel = SvdInit(n, m, train.reliability(), k);
    params.w = rating.users;
    params.z = rating.products;
    params.zv = rating.products;
    params.e = rel.users;
    params.f = rel.products;
  }
  Rng init_rng(DeriveSeed(hyper.seed, "mf-head-init"));
  params.proj_rating = DenseMatrix::Identity(k);
  params.proj_joint = DenseMatrix::Identity(k);
  params.head.FillNormal(init_rng, 0.0, 0.01);
  params.reg.FillNormal(init_rng, 0.0, 0.01);
  params.bias(0, 0) = train.MeanRawRating() / 5.0;

  Rng rng(DeriveSeed(hyper.seed, "mf-batches"));
  MfParams grads = ZerosLike(params);
  const AdamConfig adam{hyper.lr};

  // Factor objectives.
  struct FactorPhase {
    const char* name;
    bool joint;
  };
  for (const FactorPhase phase :
       {FactorPhase{"mf-rating", false}, FactorPhase{"mf-joint", true}}) {
    std::vector<Term> terms = RatingTerms(train);
    BlockList pblocks;
    BlockList gblocks;
    if (phase.joint) {
      auto rel = ReliabilityTerms(train);
      terms.insert(terms.end(), rel.begin(), rel.end());
      pblocks = {{"e", &params.e}, {"zv", &params.zv}, {"f", &params.f}};
      gblocks = {{"e", &grads.e}, {"zv", &grads.zv}, {"f", &grads.f}};
    } else {
      pblocks = {{"w", &params.w}, {"z", &params.z}};
      gblocks = {{"w", &grads.w}, {"z", &grads.z}};
    }
    BlockAdam opt(pblocks, adam);
    EarlyStopper stopper(pblocks, hyper.patience);
    Batches batches(terms.size(), hyper.batch_size);
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
      Stopwatch clock;
      std::shuffle(batches.order.begin(), batches.order.end(), rng);
      double loss = 0.0;
      for (std::size_t start = 0; start < terms.size(); start += batches.size) {
        const std::size_t end = std::min(terms.size(), start + batches.size);
        const double scale = 1.0 / static_cast<double>(end - start);
        ZeroBlocks(gblocks);
        for (std::size_t b = start; b < end; ++b) {
          loss += AccumulateTerm(params, terms[batches.order[b]], hyper.lambda,
                                 phase.joint, scale, grads);
        }
        opt.Step(gblocks);
      }
      loss /= static_cast<double>(terms.size());
      CheckFinite(loss, phase.name, epoch);
      EpochLog entry{phase.name, epoch, loss};
      bool stop = false;
      if (validation != nullptr) {
        entry.val_mae = phase.joint
                            ? ValidationMae(*validation,
                                            [&](Index u, Index j) {
                                              return JointFactorPredict(params, u, j);
                                            })
                            : ValidationMae(*validation, [&](Index u, Index j) {
                                return RatingFactorPredict(params, u, j);
                              });
        stop = stopper.Observe(entry.val_mae);
      }
      entry.seconds = clock.Seconds();
      if (log != nullptr) log->epochs.push_back(entry);
      if (stop) break;
    }
    if (validation != nullptr) stopper.RestoreBest();
  }

  // Regression head under MAE against raw ratings, factors held fixed.
  {
    BlockList pblocks = params.HeadBlocks();
    BlockList gblocks = grads.HeadBlocks();
    BlockList all_grads = grads.Blocks();
    BlockAdam opt(pblocks, adam);
    EarlyStopper stopper(pblocks, hyper.patience);
    const auto& ratings = train.ratings();
    Batches batches(ratings.size(), hyper.batch_size);
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
      Stopwatch clock;
      std::shuffle(batches.order.begin(), batches.order.end(), rng);
      double loss = 0.0;
      for (std::size_t start = 0; start < ratings.size();
           start += batches.size) {
        const std::size_t end = std::min(ratings.size(), start + batches.size);
        const double scale = 1.0 / static_cast<double>(end - start);
        ZeroBlocks(all_grads);
        for (std::size_t b = start; b < end; ++b) {
          const auto& r = ratings[batches.order[b]];
          loss += HeadTerm(params, r.user, r.product, r.raw, scale, grads);
        }
        opt.Step(gblocks);
      }
      loss /= static_cast<double>(ratings.size());
      CheckFinite(loss, "mf-head", epoch);
      EpochLog entry{"mf-head", epoch, loss};
      bool stop = false;
      if (validation != nullptr) {
        entry.val_mae = ValidationMae(*validation, [&](Index u, Index j) {
          return MfPretrainPredict(params, u, j);
        });
        stop = stopper.Observe(entry.val_mae);
      }
      entry.seconds = clock.Seconds();
      if (log != nullptr) log->epochs.push_back(entry);
      if (stop) break;
    }
    if (validation != nullptr) stopper.RestoreBest();
  }
  return params;
}

}  // namespace fdmf
