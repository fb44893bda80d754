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
#include <set>
#include <sstream>

#include "fusiondeepmf/errors.hpp"
#include "fusiondeepmf/harness.hpp"

namespace fdmf {
namespace {

ExperimentConfig TinyConfig() {
  ExperimentConfig c;
  SyntheticSpec s;
  s.n_users = 30;
  s.n_products = 25;
  s.density = 0.4;
  s.seed = 3;
  c.synthetic = s;
  c.latent_dim = 3;
  c.tower = {4, 2};
  c.batch_size = 64;
  c.mf_epochs = 2;
  c.mlp_epochs = 2;
  c.fusion_epochs = 2;
  c.lr = 0.005;
  c.split.folds = 3;
  c.seed = 11;
  c.deterministic = true;
  return c;
}

TEST(Split, SizesForOneHundred) {
  const auto s = ComputeSplitSizes(100, SplitSpec{});
  EXPECT_EQ(s.train, 70u);
  EXPECT_EQ(s.val, 15u);
  EXPECT_EQ(s.test, 15u);
  EXPECT_THROW(ComputeSplitSizes(2, SplitSpec{}), InvalidArgument);
}

TEST(Split, RejectsBadFractions) {
  SplitSpec bad;
  bad.train_frac = 0.8;
  EXPECT_THROW(ValidateSplitSpec(bad), InvalidArgument);
  bad.train_frac = 0.0;
  bad.val_frac = 0.5;
  bad.test_frac = 0.5;
  EXPECT_THROW(ValidateSplitSpec(bad), InvalidArgument);
  SplitSpec no_folds;
  no_folds.folds = 0;
  EXPECT_THROW(ValidateSplitSpec(no_folds), InvalidArgument);
}

TEST(Split, PartitionIsDisjointCompleteAndDeterministic) {
  const auto data = GenSynthetic(SyntheticSpec{});
  const std::size_t n = data.store.reviews().size();
  SplitSpec spec;
  spec.seed = 5;
  const auto a = SplitFold(data.store, spec, 0);
  std::set<std::size_t> seen;
  for (const auto* rows : {&a.train_rows, &a.val_rows, &a.test_rows}) {
    for (std::size_t r : *rows) EXPECT_TRUE(seen.insert(r).second);
  }
  EXPECT_EQ(seen.size(), n);
  EXPECT_EQ(a.train.ratings().size(), a.train_rows.size());
  EXPECT_EQ(a.test.ratings().size(), a.test_rows.size());

  const auto again = SplitFold(data.store, spec, 0);
  EXPECT_EQ(a.train_rows, again.train_rows);
  EXPECT_EQ(a.test_rows, again.test_rows);
  const auto other = SplitFold(data.store, spec, 1);
  EXPECT_NE(a.train_rows, other.train_rows);
  EXPECT_THROW(SplitFold(data.store, spec, spec.folds), InvalidArgument);
}

TEST(Split, SweepRuleSplitsRemainderEvenly) {
  const auto s = SweepSplitSpec(0.5, SplitSpec{});
  EXPECT_DOUBLE_EQ(s.val_frac, 0.25);
  EXPECT_DOUBLE_EQ(s.test_frac, 0.25);
  const auto t = SweepSplitSpec(0.8, SplitSpec{});
  EXPECT_NEAR(t.val_frac, 0.1, 1e-15);
  EXPECT_NEAR(t.test_frac, 0.1, 1e-15);
  EXPECT_THROW(SweepSplitSpec(1.0, SplitSpec{}), InvalidArgument);
}

TEST(Synthetic, DensityWithinThreeSigma) {
  for (double density : {0.3, 0.01}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      SyntheticSpec spec;
      spec.density = density;
      spec.seed = seed;
      const auto data = GenSynthetic(spec);
      const double cells = 50.0 * 40.0;
      const double got = data.store.ratings().size() / cells;
      const double sigma = std::sqrt(density * (1 - density) / cells);
      EXPECT_LE(std::abs(got - density), 3 * sigma)
          << "density " << density << " seed " << seed;
    }
  }
}

TEST(Synthetic, ValuesAndShapes) {
  const auto data = GenSynthetic(SyntheticSpec{});
  EXPECT_EQ(data.user_factors.rows(), 50u);
  EXPECT_EQ(data.user_factors.cols(), 2u);
  EXPECT_EQ(data.product_factors.rows(), 40u);
  for (const auto& r : data.store.ratings()) {
    EXPECT_GE(r.raw, 1);
    EXPECT_LE(r.raw, 5);
  }
  ASSERT_EQ(data.store.reliability().size(), data.store.ratings().size());
  for (const auto& e : data.store.reliability()) {
    EXPECT_GT(e.value, 0.0);
    EXPECT_LT(e.value, 1.0);
  }
  for (const auto& rec : data.store.reviews()) {
    EXPECT_LE(rec.helpful_yes, rec.votes_total);
  }
}

TEST(Synthetic, SeedDeterminism) {
  SyntheticSpec spec;
  spec.seed = 42;
  const auto a = GenSynthetic(spec);
  const auto b = GenSynthetic(spec);
  std::ostringstream sa, sb;
  WriteReviewsJsonl(a.store, sa);
  WriteReviewsJsonl(b.store, sb);
  EXPECT_EQ(sa.str(), sb.str());
  spec.seed = 43;
  std::ostringstream sc;
  WriteReviewsJsonl(GenSynthetic(spec).store, sc);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Synthetic, JsonlRoundTripsThroughParser) {
  SyntheticSpec spec;
  spec.n_users = 12;
  spec.n_products = 9;
  spec.density = 0.5;
  const auto data = GenSynthetic(spec);
  std::stringstream io;
  WriteReviewsJsonl(data.store, io);
  const auto back = BuildStore(ParseReviews(io));
  ASSERT_EQ(back.ratings().size(), data.store.ratings().size());
  for (const auto& r : data.store.ratings()) {
    const auto u = back.users().Find(data.store.users().Key(r.user));
    const auto p = back.products().Find(data.store.products().Key(r.product));
    ASSERT_TRUE(u && p);
    EXPECT_EQ(back.Rating(*u, *p), data.store.Rating(r.user, r.product));
  }
}

TEST(Synthetic, RejectsBadSpecs) {
  SyntheticSpec s;
  s.true_rank = 0;
  EXPECT_THROW(GenSynthetic(s), InvalidArgument);
  s = SyntheticSpec{};
  s.density = 0.0;
  EXPECT_THROW(GenSynthetic(s), InvalidArgument);
}

TEST(Tower, HalvesFromTwiceLatentDim) {
  EXPECT_EQ(MakeTower(256, 64), (std::vector<std::size_t>{512, 256, 128, 64}));
  EXPECT_EQ(MakeTower(4, 8), (std::vector<std::size_t>{8}));
}

TEST(Config, ParsesSections) {
  const auto c = ParseConfig(R"({
    "seed": 9, "deterministic": true,
    "synthetic": {"users": 20, "products": 10, "rank": 2, "density": 0.5},
    "split": {"train": 0.6, "val": 0.2, "test": 0.2, "folds": 2},
    "model": {"latent_dim": 8, "tower": [16, 8, 4], "gamma": 0.25,
              "mlp_init": "small", "pretrain": false},
    "training": {"batch": 32, "epochs": 4, "lr": 0.01},
    "reliability": {"alpha": 0.3},
    "metrics": {"ndcg_gain": "predicted", "cutoffs": [3]}
  })");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_TRUE(c.deterministic);
  ASSERT_TRUE(c.synthetic.has_value());
  EXPECT_EQ(c.synthetic->n_users, 20u);
  EXPECT_EQ(c.split.folds, 2u);
  EXPECT_EQ(c.latent_dim, 8u);
  EXPECT_EQ(c.predictive_dim(), 4u);
  EXPECT_EQ(c.gamma, 0.25);
  EXPECT_EQ(c.mlp_init, MlpInit::kSmall);
  EXPECT_FALSE(c.pretrain);
  EXPECT_EQ(c.mf_epochs, 4u);
  EXPECT_EQ(c.fusion_epochs, 4u);
  EXPECT_EQ(c.reliability.alpha, 0.3);
  EXPECT_EQ(c.eval.gain, NdcgGain::kPredicted);
  EXPECT_EQ(c.eval.cutoffs, (std::vector<std::size_t>{3}));
}

TEST(Config, DefaultsMatchReferenceSetup) {
  const auto c = ParseConfig("{}");
  EXPECT_EQ(c.latent_dim, 256u);
  EXPECT_EQ(c.predictive_dim(), 64u);
  EXPECT_EQ(c.batch_size, 512u);
  EXPECT_EQ(c.lr, 0.001);
  EXPECT_EQ(c.gamma, 0.5);
  EXPECT_EQ(c.split.folds, 5u);
  EXPECT_EQ(c.mlp_init, MlpInit::kScaled);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(ParseConfig(R"({"sede": 1})"), InvalidArgument);
  EXPECT_THROW(ParseConfig(R"({"model": {"gama": 0.5}})"), InvalidArgument);
  EXPECT_THROW(ParseConfig(R"({"model": {"mlp_init": "xavier"}})"),
               InvalidArgument);
  EXPECT_THROW(ParseConfig(R"({"metrics": {"ndcg_gain": "both"}})"),
               InvalidArgument);
  EXPECT_THROW(ParseConfig("[1, 2"), ParseError);
  EXPECT_THROW(LoadConfigFile("/nonexistent/config.json"), NotFound);
}

TEST(Experiment, NoDataSourceIsRejected) {
  EXPECT_THROW(LoadExperimentData(ExperimentConfig{}), InvalidArgument);
}

TEST(Experiment, SingleFoldMeanEqualsFoldReport) {
  auto c = TinyConfig();
  c.split.folds = 1;
  const auto store = LoadExperimentData(c);
  const auto r = RunExperiment(store, c);
  ASSERT_EQ(r.folds.size(), 1u);
  ASSERT_TRUE(r.folds[0].ok) << r.folds[0].error;
  ASSERT_TRUE(r.mean.has_value());
  EXPECT_TRUE(*r.mean == r.folds[0].report);
}

TEST(Experiment, MeanOverFoldsAndThreadIndependence) {
  auto c = TinyConfig();
  const auto store = LoadExperimentData(c);
  const auto serial = RunExperiment(store, c);
  ASSERT_TRUE(serial.mean.has_value());
  double rmse = 0, f1 = 0;
  for (const auto& f : serial.folds) {
    ASSERT_TRUE(f.ok) << f.error;
    EXPECT_GE(f.report.rmse, 0.0);
    rmse += f.report.rmse;
    f1 += f.report.f1;
  }
  EXPECT_NEAR(serial.mean->rmse, rmse / 3, 1e-12);
  EXPECT_NEAR(serial.mean->f1, f1 / 3, 1e-12);

  c.threads = 3;
  const auto parallel = RunExperiment(store, c);
  for (std::size_t f = 0; f < 3; ++f) {
    EXPECT_TRUE(serial.folds[f].report == parallel.folds[f].report);
  }
  std::ostringstream a, b;
  WriteExperiment(serial, a, false);
  WriteExperiment(parallel, b, false);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("mean\t"), std::string::npos);
}

TEST(Experiment, FailedFoldIsReportedNotFatal) {
  auto c = TinyConfig();
  c.split.folds = 2;
  c.lr = 1e300;
  const auto store = LoadExperimentData(c);
  const auto r = RunExperiment(store, c);
  for (const auto& f : r.folds) {
    EXPECT_FALSE(f.ok);
    EXPECT_FALSE(f.error.empty());
  }
  EXPECT_FALSE(r.mean.has_value());
  std::ostringstream out;
  WriteExperiment(r, out, false);
  EXPECT_NE(out.str().find("FAILED"), std::string::npos);
}

TEST(Experiment, SweepRunsEachFraction) {
  auto c = TinyConfig();
  c.split.folds = 1;
  const auto store = LoadExperimentData(c);
  const auto points = Sweep(store, c, {0.6, 0.8});
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[1].train_frac, 0.8);
  ASSERT_TRUE(points[0].result.mean.has_value());
  // Fewer test pairs with a larger training share.
  EXPECT_GT(points[0].result.mean->n_pairs, points[1].result.mean->n_pairs);
}

}  // namespace
}  // namespace fdmf
