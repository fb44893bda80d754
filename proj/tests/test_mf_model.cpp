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

#include <gtest/gtest.h>

#include <cmath>

#include "fusiondeepmf/errors.hpp"
#include "fusiondeepmf/harness.hpp"
#include "fusiondeepmf/mf_model.hpp"
#include "support.hpp"

namespace fdmf {
namespace {

using testing::Cell;
using testing::MakeStore;
using testing::RandomStore;

double Sq(double x) { return x * x; }

double RowSq(const DenseMatrix& m, std::size_t r) {
  double s = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) s += Sq(m(r, c));
  return s;
}

double RowDot(const DenseMatrix& a, std::size_t i, const DenseMatrix& b,
              std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
  return s;
}

double G(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-pair oracle: each observed pair charges lambda (|a|^2 + |b|^2) once.
double OracleRating(const MfParams& p, const InteractionStore& s, double l) {
  double total = 0.0;
  for (const auto& r : s.ratings()) {
    total += Sq(r.value - G(RowDot(p.w, r.user, p.z, r.product)));
    total += l * (RowSq(p.w, r.user) + RowSq(p.z, r.product));
  }
  return total;
}

double OracleReliability(const MfParams& p, const InteractionStore& s,
                         double l) {
  double total = 0.0;
  for (const auto& r : s.reliability()) {
    total += Sq(r.value - G(RowDot(p.e, r.user, p.f, r.product)));
    total += l * (RowSq(p.e, r.user) + RowSq(p.f, r.product));
  }
  return total;
}

double OracleJoint(const MfParams& p, const InteractionStore& s, double l) {
  double total = 0.0;
  for (const auto& r : s.ratings()) {
    total += Sq(r.value - G(RowDot(p.e, r.user, p.zv, r.product)));
    total += l * (RowSq(p.e, r.user) + RowSq(p.zv, r.product));
  }
  for (const auto& r : s.reliability()) {
    total += Sq(r.value - G(RowDot(p.e, r.user, p.f, r.product)));
    total += l * RowSq(p.f, r.product);
  }
  return total;
}

MfParams RandomParams(std::size_t n, std::size_t m, std::size_t k,
                      std::size_t p, std::uint64_t seed, double sd = 0.7) {
  Rng rng(seed);
  MfParams out = MakeMfParams(n, m, k, p);
  for (auto& b : out.Blocks()) b.matrix->FillNormal(rng, 0.0, sd);
  return out;
}

TEST(MfLoss, MatchesPerPairOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto store = RandomStore(3, 4, 0.5, seed);
    auto p = RandomParams(3, 4, 2, 2, seed + 100);
    for (double l : {0.0, 0.1, 2.5}) {
      EXPECT_NEAR(RatingLoss(p, store, l), OracleRating(p, store, l), 1e-12);
      EXPECT_NEAR(ReliabilityLoss(p, store, l), OracleReliability(p, store, l),
                  1e-12);
      EXPECT_NEAR(JointLoss(p, store, l), OracleJoint(p, store, l), 1e-12);
    }
  }
}

TEST(MfLoss, TwoByTwoHandValues) {
  ReliabilityMap rel;
  rel[{0, 0}] = 0.25;
  rel[{1, 1}] = 0.75;
  const auto store = MakeStore(2, 2, {{0, 0, 5}, {0, 1, 1}, {1, 1, 3}}, rel);
  MfParams p = MakeMfParams(2, 2, 1, 1);
  p.w(0, 0) = 1.0;
  p.w(1, 0) = -0.5;
  p.z(0, 0) = 2.0;
  p.z(1, 0) = 0.5;
  // (1 - g(2))^2 + (0.2 - g(0.5))^2 + (0.6 - g(-0.25))^2, plus 0.1 times
  // pairwise norms (1+4) + (1+0.25) + (0.25+0.25).
  const double expect = Sq(1 - G(2)) + Sq(0.2 - G(0.5)) + Sq(0.6 - G(-0.25)) +
                        0.1 * (5 + 1.25 + 0.5);
  EXPECT_NEAR(RatingLoss(p, store, 0.1), expect, 1e-14);
  // Zero factors: every residual is against sigmoid(0) = 0.5.
  const MfParams zero = MakeMfParams(2, 2, 1, 1);
  EXPECT_NEAR(RatingLoss(zero, store, 0.0), Sq(0.5) + Sq(0.3) + Sq(0.1),
              1e-15);
  EXPECT_NEAR(ReliabilityLoss(zero, store, 0.0), Sq(0.25) + Sq(0.25), 1e-15);
}

TEST(MfLoss, PerfectFitIsZero) {
  // One user, one product; pick factors so g(w.z) equals the target exactly
  // up to floating point.
  ReliabilityMap rel;
  rel[{0, 0}] = 0.5;
  const auto store = MakeStore(1, 1, {{0, 0, 5}}, rel);
  MfParams p = MakeMfParams(1, 1, 1, 1);
  p.w(0, 0) = 60.0;  // g(60) == 1 in double precision
  p.z(0, 0) = 1.0;
  p.e(0, 0) = 0.0;
  p.f(0, 0) = 3.0;
  p.zv(0, 0) = 1.0;
  EXPECT_EQ(RatingLoss(p, store, 0.0), 0.0);
  EXPECT_EQ(ReliabilityLoss(p, store, 0.0), 0.0);
  // Joint: e = 60 fits r = 1 through zv and rel = 0.5 needs e.f = 0.
  p.e(0, 0) = 60.0;
  p.f(0, 0) = 0.0;
  EXPECT_EQ(JointLoss(p, store, 0.0), 0.0);
}

TEST(MfLoss, EmptyPsiReducesJointToRatingForm) {
  const auto store = MakeStore(2, 3, {{0, 0, 4}, {1, 2, 2}, {0, 1, 5}});
  auto p = RandomParams(2, 3, 2, 1, 5);
  MfParams q = p;
  q.w = p.e;
  q.z = p.zv;
  EXPECT_NEAR(JointLoss(p, store, 0.3), RatingLoss(q, store, 0.3), 1e-14);
}

TEST(MfGradient, AllThreeObjectivesOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    Rng shape(seed);
    std::uniform_int_distribution<int> nm(2, 5);
    std::uniform_int_distribution<int> kd(1, 3);
    const std::size_t n = nm(shape), m = nm(shape), k = kd(shape);
    const auto store = RandomStore(n, m, 0.6, seed * 7 + 1);
    MfParams p = RandomParams(n, m, k, 1, seed + 50, 0.5);
    const double l = 0.1;
    struct Case {
      double (*loss)(const MfParams&, const InteractionStore&, double);
      MfParams (*grad)(const MfParams&, const InteractionStore&, double);
    };
    for (const Case c : {Case{RatingLoss, RatingLossGrad},
                         Case{ReliabilityLoss, ReliabilityLossGrad},
                         Case{JointLoss, JointLossGrad}}) {
      MfParams g = c.grad(p, store, l);
      const double err = testing::GradCheck(
          p.FactorBlocks(), g.FactorBlocks(),
          [&] { return c.loss(p, store, l); });
      EXPECT_LT(err, 1e-4) << "seed " << seed;
    }
  }
}

TEST(ThetaMf, HandCaseAndIdentity) {
  MfParams p = MakeMfParams(1, 1, 2, 1);
  // w.z = (1, 2), e.zv = (3, 4)
  p.w(0, 0) = 1;
  p.w(0, 1) = 2;
  p.z(0, 0) = 1;
  p.z(0, 1) = 1;
  p.e(0, 0) = 3;
  p.e(0, 1) = 2;
  p.zv(0, 0) = 1;
  p.zv(0, 1) = 2;
  p.proj_rating = DenseMatrix::Identity(2);
  p.proj_joint = DenseMatrix::Identity(2);
  auto t = ThetaMf(p, 0, 0);
  EXPECT_EQ(t, (std::vector<double>{4, 6}));
  p.proj_rating(0, 0) = 2;
  p.proj_rating(1, 1) = 2;
  t = ThetaMf(p, 0, 0);
  EXPECT_EQ(t, (std::vector<double>{5, 8}));
  EXPECT_THROW(ThetaMf(p, 1, 0), InvalidArgument);
}

TEST(ThetaMf, ZeroFactorsAndLinearityInProjections) {
  MfParams zero = MakeMfParams(2, 2, 3, 1);
  zero.proj_rating = DenseMatrix::Identity(3);
  for (double v : ThetaMf(zero, 1, 1)) EXPECT_EQ(v, 0.0);
  MfParams p = RandomParams(2, 2, 3, 1, 9);
  const auto base = ThetaMf(p, 1, 0);
  for (auto* m : {&p.proj_rating, &p.proj_joint}) {
    for (double& v : m->values()) v *= 2.5;
  }
  const auto scaled = ThetaMf(p, 1, 0);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(scaled[c], 2.5 * base[c], 1e-12);
}

TEST(MfHead, BiasOnlyAndPassThrough) {
  MfParams p = RandomParams(2, 2, 2, 3, 4);
  p.head.Fill(0.0);
  p.bias(0, 0) = 0.6;
  EXPECT_NEAR(MfPretrainPredict(p, 0, 1), 3.0, 1e-15);
  EXPECT_NEAR(MfPretrainPredict(p, 1, 0), 3.0, 1e-15);

  MfParams q = MakeMfParams(1, 1, 1, 1);
  q.w(0, 0) = 0.8;
  q.z(0, 0) = 1.0;
  q.proj_rating(0, 0) = 1.0;  // theta = 0.8
  q.head(0, 0) = 1.0;
  q.reg(0, 0) = 1.0;
  EXPECT_NEAR(MfHeadNormalized(q, 0, 0), 0.8, 1e-15);
  EXPECT_NEAR(MfPretrainPredict(q, 0, 0), 4.0, 1e-14);
}

TEST(SvdInit, FullyObservedExactReconstruction) {
  std::vector<Cell> cells;
  Rng rng(2);
  std::uniform_int_distribution<int> r(1, 5);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) cells.push_back({i, j, r(rng)});
  const auto store = MakeStore(4, 3, cells);
  const auto f = SvdInit(4, 3, store.ratings(), 3);
  for (const auto& e : store.ratings()) {
    EXPECT_NEAR(RowDot(f.users, e.user, f.products, e.product), e.value, 1e-8);
  }
}

TEST(SvdInit, ZeroMatrixGivesZeroFactors) {
  const auto f = SvdInit(3, 3, std::vector<ReliabilityEntry>{}, 2);
  for (double v : f.users.values()) EXPECT_EQ(v, 0.0);
  for (double v : f.products.values()) EXPECT_EQ(v, 0.0);
}

TEST(SvdInit, RankTwoObservedEntriesRecovered) {
  Rng rng(13);
  DenseMatrix u(20, 2), v(15, 2);
  u.FillNormal(rng, 0.0, 1.0);
  v.FillNormal(rng, 0.0, 1.0);
  std::vector<ReliabilityEntry> entries;
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 15; ++j) entries.push_back({i, j, RowDot(u, i, v, j)});
  const auto f = SvdInit(20, 15, entries, 2);
  double num = 0.0, den = 0.0;
  for (const auto& e : entries) {
    num += Sq(RowDot(f.users, e.user, f.products, e.product) - e.value);
    den += Sq(e.value);
  }
  EXPECT_LT(std::sqrt(num / den), 1e-6);
}

TEST(SvdInit, RankAboveMinDimensionRejected) {
  EXPECT_THROW(SvdInit(3, 2, std::vector<RatingEntry>{}, 3), InvalidArgument);
}

MfHyperparams SmallHyper(std::size_t epochs) {
  MfHyperparams h;
  h.latent_dim = 2;
  h.predictive_dim = 2;
  h.batch_size = 32;
  h.epochs = epochs;
  h.lr = 0.01;
  h.seed = 3;
  return h;
}

TEST(TrainMf, ZeroEpochsReturnsSvdInitialization) {
  const auto store = RandomStore(6, 5, 0.6, 8);
  const auto p = TrainMf(store, SmallHyper(0));
  const auto r = SvdInit(6, 5, store.ratings(), 2);
  const auto h = SvdInit(6, 5, store.reliability(), 2);
  EXPECT_EQ(p.w, r.users);
  EXPECT_EQ(p.z, r.products);
  EXPECT_EQ(p.zv, r.products);
  EXPECT_EQ(p.e, h.users);
  EXPECT_EQ(p.f, h.products);
}

TEST(TrainMf, HugeLambdaShrinksFactors) {
  const auto store = RandomStore(8, 6, 0.6, 21);
  auto h = SmallHyper(15);
  h.lambda = 0.0;
  const auto free = TrainMf(store, h);
  h.lambda = 1e6;
  const auto shrunk = TrainMf(store, h);
  EXPECT_LT(shrunk.w.SquaredNorm() + shrunk.z.SquaredNorm(),
            free.w.SquaredNorm() + free.z.SquaredNorm());
  EXPECT_LT(shrunk.e.SquaredNorm() + shrunk.zv.SquaredNorm(),
            free.e.SquaredNorm() + free.zv.SquaredNorm());
}

TEST(TrainMf, DeterministicUnderSeed) {
  const auto store = RandomStore(7, 6, 0.5, 30);
  const auto a = TrainMf(store, SmallHyper(4));
  const auto b = TrainMf(store, SmallHyper(4));
  EXPECT_TRUE(a == b);
  auto other = SmallHyper(4);
  other.seed = 4;
  EXPECT_FALSE(TrainMf(store, other) == a);
}

TEST(TrainMf, RejectsEmptyStoreAndDivergenceIsReported) {
  const auto empty = MakeStore(2, 2, {});
  EXPECT_THROW(TrainMf(empty, SmallHyper(1)), InvalidArgument);
  const auto store = RandomStore(6, 5, 0.6, 8);
  auto h = SmallHyper(3);
  h.lr = 1e300;
  EXPECT_THROW(TrainMf(store, h), Diverged);
}

TEST(TrainMf, HeadMaeDecreasesOverFirstEpochs) {
  SyntheticSpec spec;
  spec.n_users = 30;
  spec.n_products = 25;
  spec.density = 0.5;
  spec.seed = 5;
  const auto data = GenSynthetic(spec);
  auto h = SmallHyper(5);
  TrainLog log;
  TrainMf(data.store, h, nullptr, &log);
  std::vector<double> head;
  for (const auto& e : log.epochs)
    if (e.phase == "mf-head") head.push_back(e.train_loss);
  ASSERT_EQ(head.size(), 5u);
  for (std::size_t i = 0; i + 1 < head.size(); ++i) EXPECT_LT(head[i + 1], head[i]);
}

TEST(TrainMf, RecoversSyntheticRankTwoFactors) {
  SyntheticSpec spec;
  spec.noise_std = 0.0;
  spec.density = 1.0;
  spec.seed = 11;
  const auto data = GenSynthetic(spec);
  MfHyperparams h;
  h.latent_dim = 2;
  h.predictive_dim = 2;
  h.batch_size = 4096;
  h.epochs = 300;
  h.lr = 0.05;
  h.lambda = 0.0;
  h.seed = 1;
  const auto p = TrainMf(data.store, h);
  double se = 0.0, se_joint = 0.0, se_truth = 0.0;
  for (const auto& r : data.store.ratings()) {
    se += Sq(RatingFactorPredict(p, r.user, r.product) / 5.0 - r.value);
    se_joint += Sq(JointFactorPredict(p, r.user, r.product) / 5.0 - r.value);
    const double truth = G(RowDot(data.user_factors, r.user,
                                  data.product_factors, r.product));
    se_truth += Sq(truth - r.value);
  }
  const double n = static_cast<double>(data.store.ratings().size());
  const double rmse = std::sqrt(se / n);
  const double rmse_joint = std::sqrt(se_joint / n);
  // Integer rounding and the clamp at 1 leave the generating model itself
  // at this RMSE.
  const double floor = std::sqrt(se_truth / n);
  EXPECT_GT(floor, 0.05);
  EXPECT_LT(rmse, floor + 0.005) << "floor " << floor;
  EXPECT_LT(rmse_joint, floor + 0.005) << "floor " << floor;
}

}  // namespace
}  // namespace fdmf
