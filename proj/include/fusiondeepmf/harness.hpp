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

#ifndef FUSIONDEEPMF_HARNESS_HPP_
#define FUSIONDEEPMF_HARNESS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fusiondeepmf/fusion.hpp"
#include "fusiondeepmf/ingest.hpp"
#include "fusiondeepmf/linalg.hpp"
#include "fusiondeepmf/metrics.hpp"
#include "fusiondeepmf/mf_model.hpp"
#include "fusiondeepmf/mlp_model.hpp"
#include "fusiondeepmf/reliability.hpp"

namespace fdmf {

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

void ValidateSplitSpec(const SplitSpec& spec);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// train = round(train_frac N), val = round(val_frac N), test = the rest.
// Throws InvalidArgument if any part would be empty.
SplitSizes ComputeSplitSizes(std::size_t n, const SplitSpec& spec);

struct FoldSplit {
  std::vector<std::size_t> train_rows;  // positions into store.reviews()
  std::vector<std::size_t> val_rows;
  std::vector<std::size_t> test_rows;
  InteractionStore train;
  InteractionStore val;
  InteractionStore test;
};

// Interaction-level random partition for one fold. Every fold draws its own
// permutation from (seed, fold).
FoldSplit SplitFold(const InteractionStore& store, const SplitSpec& spec,
                    std::size_t fold);

// Table-style sweep rule: validation and test each take (1 - x) / 2.
SplitSpec SweepSplitSpec(double train_frac, const SplitSpec& base);

struct SyntheticSpec {
  std::size_t n_users = 50;
  std::size_t n_products = 40;
  std::size_t true_rank = 2;
  double density = 0.3;
  double noise_std = 0.05;  // on the normalized (rating / 5) scale
  std::uint64_t seed = 0;
};

struct SyntheticData {
  InteractionStore store;           // reliability = ground truth g(u . c)
  DenseMatrix user_factors;         // n x r
  DenseMatrix product_factors;      // m x r, rating model
  DenseMatrix reliability_factors;  // m x r, reliability model
};

// Ratings are round(5 (g(u_i . v_j) + noise)) clamped to 1..5 on the cells
// kept by a Bernoulli(density) mask. This is the model's own 5 g(.) link, so
// a rank-r factorization can represent the data up to clamping and rounding. Helpful votes are drawn so that
// the yes fraction follows g(u_i . c_j).
SyntheticData GenSynthetic(const SyntheticSpec& spec);

// Writes the store's reviews as line-delimited JSON in the review schema
// the ingest parser reads.
void WriteReviewsJsonl(const InteractionStore& store, std::ostream& out);

// Hidden tower widths from 2K halving down to p.
std::vector<std::size_t> MakeTower(std::size_t latent_dim,
                                   std::size_t predictive_dim);

struct ExperimentConfig {
  std::string store_path;    // prebuilt store file
  std::string reviews_path;  // line-delimited reviews
  std::int64_t min_votes = 0;
  std::optional<SyntheticSpec> synthetic;

  SplitSpec split;
  std::size_t latent_dim = 256;
  std::vector<std::size_t> tower = {512, 256, 128, 64};
  double lambda = 0.1;
  double gamma = 0.5;
  bool pretrain = true;
  bool svd_mlp_embeddings = false;
  MlpInit mlp_init = MlpInit::kScaled;
  bool freeze_branches = false;

  std::size_t batch_size = 512;
  std::size_t mf_epochs = 12;
  std::size_t mlp_epochs = 12;
  std::size_t fusion_epochs = 12;
  double lr = 0.001;
  std::size_t patience = 3;

  ReliabilityOptions reliability;
  EvalOptions eval;

  std::uint64_t seed = 0;
  bool deterministic = false;
  std::size_t threads = 1;

  std::size_t predictive_dim() const { return tower.back(); }
};

// Nested JSON object; unknown keys are rejected so typos surface early.
ExperimentConfig ParseConfig(const std::string& json_text);
ExperimentConfig LoadConfigFile(const std::string& path);

// Per-stage hyperparameters for one fold, seeded from (seed, fold).
MfHyperparams MfHyperFor(const ExperimentConfig& config, std::uint64_t seed);
MlpHyperparams MlpHyperFor(const ExperimentConfig& config, std::uint64_t seed);
FusionHyperparams FusionHyperFor(const ExperimentConfig& config,
                                 std::uint64_t seed);
std::uint64_t FoldSeed(std::uint64_t root, std::size_t fold);

struct PhaseTiming {
  std::string phase;
  double seconds = 0.0;
  std::size_t epochs = 0;
};

struct PipelineResult {
  FusionModel model;
  TrainLog log;
  std::vector<PhaseTiming> timings;
};

// pretrain-MF, pretrain-MLP and fusion training on one split. Without
// pre-training the fused model starts from InitFusionRandom and trains for
// the same total epoch budget.
PipelineResult TrainPipeline(const InteractionStore& train,
                             const InteractionStore* val,
                             const ExperimentConfig& config,
                             std::uint64_t seed);

// Clamped raw-scale predictions for every rating in `test`.
EvalReport EvaluateModel(const FusionModel& model,
                         const InteractionStore& test,
                         const EvalOptions& options);

struct FoldResult {
  std::size_t fold = 0;
  bool ok = false;
  std::string error;
  EvalReport report;
  std::vector<PhaseTiming> timings;
  TrainLog log;
};

struct ExperimentResult {
  std::vector<FoldResult> folds;
  std::optional<EvalReport> mean;  // over successful folds
};

// Loads or generates the data named by the config and attaches reliability
// scores when the store has none.
InteractionStore LoadExperimentData(const ExperimentConfig& config);

ExperimentResult RunExperiment(const InteractionStore& store,
                               const ExperimentConfig& config);

struct SweepPoint {
  double train_frac = 0.0;
  ExperimentResult result;
};

std::vector<SweepPoint> Sweep(const InteractionStore& store,
                              const ExperimentConfig& config,
                              const std::vector<double>& train_fracs);

// Human-readable fold table and mean, one line per fold.
void WriteExperiment(const ExperimentResult& result, std::ostream& out,
                     bool with_timings);

}  // namespace fdmf

#endif  // FUSIONDEEPMF_HARNESS_HPP_
