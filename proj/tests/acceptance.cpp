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

// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fusiondeepmf/fusion.hpp"
#include "fusiondeepmf/harness.hpp"
#include "fusiondeepmf/metrics.hpp"
#include "fusiondeepmf/mf_model.hpp"
#include "fusiondeepmf/mlp_model.hpp"
#include "fusiondeepmf/reliability.hpp"
#include "support.hpp"

namespace fdmf {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// ---- criteria ----

Outcome Irreproducibility() {
  return {true,
          "published per-dataset metrics need the full review corpora "
          "(millions of ratings) and are not reproduced at desk scale; the "
          "criteria below are property-based"};
}

Outcome ReliabilitySuite() {
  const auto start = Clock::now();
  Rng rng(20240601);
  std::uniform_int_distribution<int> reviewers(1, 50);
  std::uniform_int_distribution<int> totals(0, 40);
  std::uniform_int_distribution<std::int64_t> times(0, 1'000'000);
  double worst = 0.0;
  std::size_t out_of_range = 0, checked = 0;
  for (Index product = 0; product < 1000; ++product) {
    std::vector<TimelineEntry> timeline;
    const int n = reviewers(rng);
    std::vector<std::int64_t> when(n);
    for (auto& t : when) t = times(rng);
    std::sort(when.begin(), when.end());
    bool any_yes = false;
    for (int i = 0; i < n; ++i) {
      const int total = totals(rng);
      const int yes = std::uniform_int_distribution<int>(0, total)(rng);
      any_yes |= yes > 0;
      timeline.push_back({static_cast<Index>(i), when[i], yes, total,
                          static_cast<std::size_t>(i)});
    }
    const auto rows = ScoreProduct(product, timeline);
    double h = 0, most = 0, top = 0;
    for (const auto& r : rows) {
      h += r.h;
      most += r.most;
      top += r.top;
      for (double v : {r.h, r.most, r.top, r.d, r.rel}) {
        if (!(v >= 0.0 && v <= 1.0)) ++out_of_range;
      }
    }
    if (any_yes) worst = std::max(worst, std::abs(h - 1.0));
    if (n >= 2) {
      worst = std::max({worst, std::abs(most - 1.0), std::abs(top - 1.0)});
      ++checked;
    }
  }
  const double secs = Since(start);
  return {worst <= 1e-12 && out_of_range == 0 && secs < 5.0,
          Fmt("1000 products (%zu with >= 2 reviewers), max |sum - 1| = "
              "%.2e, out-of-range scores = %zu, %.2fs",
              checked, worst, out_of_range, secs)};
}

Outcome WorkedExample() {
  const double want = 1.0 + 1.0 / 4 + 1.0 / 9 + 1.0 / 16;
  const double got = RecencyWeight(1, 5);
  return {got == want, Fmt("c(first of five) = %.17g, expected %.17g", got,
                           want)};
}

MfParams RandomMfParams(std::size_t n, std::size_t m, std::size_t k,
                        std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  MfParams out = MakeMfParams(n, m, k, p);
  for (auto& b : out.Blocks()) b.matrix->FillNormal(rng, 0.0, 0.7);
  return out;
}

MlpParams RandomMlpParams(std::size_t n, std::size_t m, std::size_t k,
                          const std::vector<std::size_t>& tower,
                          std::uint64_t seed) {
  MlpParams out = InitMlp(n, m, k, tower, seed);
  Rng rng(seed + 1000);
  for (auto& b : out.Blocks()) b.matrix->FillNormal(rng, 0.0, 0.6);
  // Positive biases keep most units active so the check is informative.
  for (auto& b : out.tower_biases)
    for (double& v : b.values()) v = std::abs(v) + 0.2;
  return out;
}

Outcome Gradients() {
  const auto start = Clock::now();
  constexpr int kSeeds = 24;
  double worst[5] = {0, 0, 0, 0, 0};
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng shape(seed + 900);
    std::uniform_int_distribution<int> nm(2, 5);
    std::uniform_int_distribution<int> kd(1, 3);
    const std::size_t n = nm(shape), m = nm(shape), k = kd(shape);
    const auto store = testing::RandomStore(n, m, 0.6, seed * 13 + 5);

    // Factor objectives.
    MfParams mf = RandomMfParams(n, m, k, 1, seed + 40);
    using Loss = double (*)(const MfParams&, const InteractionStore&, double);
    using Grad = MfParams (*)(const MfParams&, const InteractionStore&, double);
    const std::pair<Loss, Grad> objectives[] = {
        {RatingLoss, RatingLossGrad},
        {ReliabilityLoss, ReliabilityLossGrad},
        {JointLoss, JointLossGrad}};
    for (int o = 0; o < 3; ++o) {
      const auto [loss, grad] = objectives[o];
      MfParams g = grad(mf, store, 0.1);
      worst[o] = std::max(
          worst[o], testing::GradCheck(mf.FactorBlocks(), g.FactorBlocks(),
                                       [&] { return loss(mf, store, 0.1); }));
    }

    // MLP tower under squared error on the normalized head.
    std::vector<std::size_t> tower;
    std::size_t width = 2 * k;
    for (int l = std::uniform_int_distribution<int>(1, 2)(shape); l > 0; --l) {
      width = std::uniform_int_distribution<std::size_t>(1, width)(shape);
      tower.push_back(width);
    }
    MlpParams mlp = RandomMlpParams(n, m, k, tower, seed + 70);
    const auto mlp_loss = [&] {
      double total = 0.0;
      MlpCache c;
      for (const auto& r : store.ratings()) {
        const double d = MlpHeadForward(mlp, r.user, r.product, c) - r.value;
        total += 0.5 * d * d;
      }
      return total;
    };
    MlpParams mg = ZerosLike(mlp);
    {
      MlpCache c;
      for (const auto& r : store.ratings()) {
        const double pred = MlpHeadForward(mlp, r.user, r.product, c);
        MlpBackward(mlp, c, pred - r.value, mg);
      }
    }
    worst[3] = std::max(worst[3],
                        testing::GradCheck(mlp.Blocks(), mg.Blocks(), mlp_loss));

    // Fused model, all trainable blocks.
    const std::size_t p = tower.back();
    FusionModel f = InitFusion(RandomMfParams(n, m, k, p, seed + 3),
                               RandomMlpParams(n, m, k, tower, seed + 4), 0.5);
    {
      Rng rng(seed + 5);
      std::normal_distribution<double> noise(0.0, 0.5);
      for (const auto& b : f.HeadBlocks())
        for (double& v : b.matrix->values()) v += noise(rng);
    }
    const auto fused_loss = [&] {
      double total = 0.0;
      for (const auto& r : store.ratings()) {
        const double d = FusedForwardNormalized(f, r.user, r.product) - r.value;
        total += 0.5 * d * d;
      }
      return total;
    };
    FusionModel fg = ZerosLike(f);
    {
      FusionCache c;
      for (const auto& r : store.ratings()) {
        const double pred = FusedForwardNormalized(f, r.user, r.product, &c);
        FusedBackward(f, r.user, r.product, c, pred - r.value, fg);
      }
    }
    worst[4] = std::max(worst[4],
                        testing::GradCheck(f.TrainableBlocks(false),
                                           fg.TrainableBlocks(false),
                                           fused_loss));
  }
  const double secs = Since(start);
  const double max_err = *std::max_element(worst, worst + 5);
  return {max_err < 1e-4 && secs < 30.0,
          Fmt("%d instances, max relative error: rating %.1e, reliability "
              "%.1e, joint %.1e, mlp %.1e, fused %.1e; %.2fs",
              kSeeds, worst[0], worst[1], worst[2], worst[3], worst[4], secs)};
}

Outcome SyntheticRecovery() {
  const auto start = Clock::now();
  double min_gain = 1.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;  // 50 x 40, rank 2, density 0.3, noise 0.05
    spec.seed = seed;
    const auto data = GenSynthetic(spec);
    SplitSpec split;
    split.seed = seed;
    const auto fold = SplitFold(data.store, split, 0);
    MfHyperparams h;
    h.latent_dim = 2;
    h.predictive_dim = 2;
    h.lambda = 0.001;
    h.batch_size = 32;
    h.epochs = 300;
    h.lr = 0.01;
    h.patience = 20;
    h.seed = seed;
    const auto params = TrainMf(fold.train, h, &fold.val);
    const double mean = fold.train.MeanRawRating();
    double se = 0.0, se_base = 0.0;
    for (const auto& r : fold.test.ratings()) {
      const double y = r.raw;
      se += std::pow(JointFactorPredict(params, r.user, r.product) - y, 2);
      se_base += std::pow(mean - y, 2);
    }
    const double gain = 1.0 - std::sqrt(se / se_base);
    min_gain = std::min(min_gain, gain);
    per_seed += Fmt(" %.0f%%", 100 * gain);
  }
  const double secs = Since(start);
  return {min_gain >= 0.40 && secs < 60.0,
          Fmt("K=2 joint factors, held-out RMSE below global mean by "
              "(5 seeds):%s; %.2fs",
              per_seed.c_str(), secs)};
}

Outcome BlockInitIdentity() {
  const auto start = Clock::now();
  std::size_t changed = 0, compared = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t n = 6, m = 5, k = 3;
    const std::vector<std::size_t> tower = {4, 2};
    const auto mf = RandomMfParams(n, m, k, 2, seed + 1);
    const auto mlp = RandomMlpParams(n, m, k, tower, seed + 2);
    for (double gamma : {1.0, 0.0}) {
      FusionModel base = InitFusion(mf, mlp, gamma);
      FusionModel moved = base;
      Rng rng(seed + 9);
      std::normal_distribution<double> noise(0.0, 0.3);
      const BlockList blocks =
          gamma == 1.0 ? moved.mlp.Blocks() : moved.mf.Blocks();
      for (const auto& b : blocks)
        for (double& v : b.matrix->values()) v += noise(rng);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
          ++compared;
          if (FusedForwardNormalized(base, i, j) !=
              FusedForwardNormalized(moved, i, j))
            ++changed;
        }
      }
    }
  }
  const double secs = Since(start);
  return {changed == 0 && secs < 1.0,
          Fmt("%zu of %zu predictions changed after perturbing the "
              "silenced branch; %.3fs",
              changed, compared, secs)};
}

Outcome PretrainingDirection() {
  int wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ExperimentConfig c;
    SyntheticSpec s;
    s.seed = seed;
    c.synthetic = s;
    c.latent_dim = 2;
    c.tower = MakeTower(2, 1);
    c.lambda = 0.001;
    c.batch_size = 32;
    c.mf_epochs = c.mlp_epochs = c.fusion_epochs = 30;
    c.lr = 0.01;
    c.patience = 1000;
    c.seed = seed;
    c.split.seed = seed;
    const auto store = LoadExperimentData(c);
    const auto fold = SplitFold(store, c.split, 0);
    double mae[2];
    for (int pre = 0; pre < 2; ++pre) {
      c.pretrain = pre == 1;
      const auto trained = TrainPipeline(fold.train, &fold.val, c, seed);
      mae[pre] = EvaluateModel(trained.model, fold.test, c.eval).mae;
    }
    wins += mae[1] <= mae[0];
    per_seed += Fmt(" %.3f/%.3f", mae[1], mae[0]);
  }
  return {wins >= 4, Fmt("with <= without pre-training in %d/5 seeds "
                         "(test MAE with/without:%s)",
                         wins, per_seed.c_str())};
}

Outcome MetricOracles() {
  Rng rng(31337);
  std::uniform_int_distribution<int> size(1, 5);
  std::uniform_int_distribution<int> rating(1, 5);
  std::uniform_int_distribution<int> half(2, 10);
  double worst = 0.0;
  std::size_t users = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n_users = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<UserPredictions> group;
    for (int u = 0; u < n_users; ++u) {
      UserPredictions up;
      up.user = static_cast<Index>(u);
      std::vector<Index> products = {0, 1, 2, 3, 4, 5, 6, 7};
      std::shuffle(products.begin(), products.end(), rng);
      for (int k = size(rng); k > 0; --k) {
        up.products.push_back(products[k]);
        up.predicted.push_back(half(rng) / 2.0);
        up.truth.push_back(rating(rng));
      }
      group.push_back(up);
    }
    double ndcg = 0.0, map = 0.0;
    for (const auto& u : group) {
      ndcg += testing::BruteNdcg(u);
      map += testing::BruteAveragePrecision(u);
    }
    worst = std::max({worst, std::abs(Ndcg(group) - ndcg / n_users),
                      std::abs(Map(group) - map / n_users)});
    users += group.size();
  }
  // Hand fixtures.
  const std::vector<double> pred = {3, 4}, truth = {3, 5};
  const bool rmse_ok = std::abs(Rmse(pred, truth) - std::sqrt(0.5)) < 1e-15;
  const bool mae_ok = Mae(pred, truth) == 0.5;
  UserPredictions a{0, {1, 2}, {4, 4}, {2, 4}};
  UserPredictions b{1, {3, 4}, {5, 2}, {3, 5}};
  const std::vector<UserPredictions> toy = {a, b};
  const auto pr = ClassificationMetrics(toy);
  const bool f1_ok = std::abs(pr.f1 - 0.75) < 1e-15 &&
                     std::abs(pr.precision - 0.75) < 1e-15 &&
                     std::abs(pr.recall - 0.75) < 1e-15;
  return {worst <= 1e-12 && rmse_ok && mae_ok && f1_ok,
          Fmt("200 cases, %zu users, max |NDCG/MAP - brute force| = %.1e; "
              "RMSE/MAE/F1 fixtures %s",
              users, worst, rmse_ok && mae_ok && f1_ok ? "match" : "DIFFER")};
}

double MfEpochSeconds(double density) {
  SyntheticSpec s;
  s.n_users = 400;
  s.n_products = 300;
  s.density = density;
  s.seed = 1;
  const auto data = GenSynthetic(s);
  MfHyperparams h;
  h.latent_dim = 16;
  h.predictive_dim = 8;
  h.epochs = 4;
  h.batch_size = 256;
  h.lr = 0.001;
  h.lambda = 0.01;
  TrainLog log;
  TrainMf(data.store, h, nullptr, &log);
  std::vector<double> t;
  for (const auto& e : log.epochs) {
    if (e.phase == "mf-rating" || e.phase == "mf-joint") t.push_back(e.seconds);
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

Outcome LinearScaling() {
  std::vector<double> ratios;
  for (int rep = 0; rep < 3; ++rep) {
    ratios.push_back(MfEpochSeconds(0.4) / MfEpochSeconds(0.2));
  }
  std::sort(ratios.begin(), ratios.end());
  const double r = ratios[1];
  return {r >= 1.4 && r <= 2.6,
          Fmt("doubling |ratings| (400x300, density 0.2 -> 0.4, K=16) scales "
              "the median MF epoch by %.2fx (median of %.2f, %.2f, %.2f)",
              r, ratios[0], ratios[1], ratios[2])};
}

int Shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string ReadAll(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome CliDeterminism() {
  const fs::path root = fs::temp_directory_path() / "fdmf_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = FDMF_CLI_PATH;
  const std::string reviews = (root / "reviews.jsonl").string();
  if (Shell(cli + " --quiet --seed 6 synth --users 40 --products 30 "
                  "--density 0.3 --out " + (root / "src.store").string() +
            " --reviews-out " + reviews) != 0) {
    return {false, "could not generate input reviews"};
  }
  const std::vector<std::string> artifacts = {
      "store", "scored.store", "rel.tsv", "mf.ckpt", "mlp.ckpt",
      "fused.ckpt", "report.tsv"};
  const std::string model =
      " --latent-dim 4 --tower 8,4,2 --epochs 3 --batch 64 --lr 0.005";
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    auto p = [&](const std::string& name) { return (d / name).string(); };
    const std::string g = cli + " --quiet --deterministic --seed 17 ";
    const std::vector<std::string> steps = {
        g + "ingest --input " + reviews + " --out " + p("store"),
        g + "reliability --store " + p("store") + " --out " + p("rel.tsv") +
            " --store-out " + p("scored.store"),
        g + "pretrain-mf --store " + p("scored.store") + " --out " +
            p("mf.ckpt") + model,
        g + "pretrain-mlp --store " + p("scored.store") + " --out " +
            p("mlp.ckpt") + model,
        g + "train --store " + p("scored.store") + " --mf " + p("mf.ckpt") +
            " --mlp " + p("mlp.ckpt") + " --out " + p("fused.ckpt") + model,
        g + "evaluate --model " + p("fused.ckpt") + " --store " +
            p("scored.store") + " --out " + p("report.tsv"),
    };
    for (const auto& step : steps) {
      if (Shell(step + " 2>/dev/null") != 0) {
        return {false, "pipeline step failed: " + step};
      }
    }
  }
  std::size_t same = 0, bytes = 0;
  std::string differing;
  for (const auto& name : artifacts) {
    const std::string a = ReadAll(root / "a" / name);
    const std::string b = ReadAll(root / "b" / name);
    if (!a.empty() && a == b) {
      ++same;
      bytes += a.size();
    } else {
      differing += " " + name;
    }
  }
  fs::remove_all(root);
  return {same == artifacts.size(),
          same == artifacts.size()
              ? Fmt("ingest, reliability, pretrain x2, fusion and evaluate "
                    "outputs byte-identical across two runs (%zu files, "
                    "%zu bytes)",
                    same, bytes)
              : "differing artifacts:" + differing};
}

}  // namespace
}  // namespace fdmf

int main() {
  using fdmf::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria =
      {{"full-corpus irreproducibility stated", fdmf::Irreproducibility},
       {"reliability suite", fdmf::ReliabilitySuite},
       {"worked example for the recency weight", fdmf::WorkedExample},
       {"gradient correctness", fdmf::Gradients},
       {"synthetic recovery", fdmf::SyntheticRecovery},
       {"fusion block-init identity", fdmf::BlockInitIdentity},
       {"pre-training direction", fdmf::PretrainingDirection},
       {"metric oracles", fdmf::MetricOracles},
       {"linear scaling", fdmf::LinearScaling},
       {"pipeline determinism", fdmf::CliDeterminism}};
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name,
                o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
