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

#include "fusiondeepmf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "fusiondeepmf/errors.hpp"
#include "fusiondeepmf/rng.hpp"
#include "json.hpp"

namespace fdmf {
namespace {

using nlohmann::json;

constexpr std::int64_t kSyntheticEpoch = 1262304000;  // 2010-01-01

}  // namespace

void ValidateSplitSpec(const SplitSpec& spec) {
  for (double f : {spec.train_frac, spec.val_frac, spec.test_frac}) {
    if (!(f > 0.0 && f < 1.0)) {
      throw InvalidArgument("split fractions must lie in (0, 1), got " +
                            std::to_string(f));
    }
  }
  const double sum = spec.train_frac + spec.val_frac + spec.test_frac;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must sum to 1, got " +
                          std::to_string(sum));
  }
  if (spec.folds < 1) throw InvalidArgument("folds must be >= 1");
}

SplitSizes ComputeSplitSizes(std::size_t n, const SplitSpec& spec) {
  ValidateSplitSpec(spec);
  const double dn = static_cast<double>(n);
  SplitSizes s;
  s.train = static_cast<std::size_t>(std::llround(spec.train_frac * dn));
  s.val = static_cast<std::size_t>(std::llround(spec.val_frac * dn));
  if (s.train + s.val >= n || s.train == 0 || s.val == 0) {
    throw InvalidArgument("not enough interactions (" + std::to_string(n) +
                          ") for the requested split");
  }
  s.test = n - s.train - s.val;
  return s;
}

FoldSplit SplitFold(const InteractionStore& store, const SplitSpec& spec,
                    std::size_t fold) {
  if (fold >= spec.folds) {
    throw InvalidArgument("fold " + std::to_string(fold) + " out of range");
  }
  const std::size_t n = store.reviews().size();
  const SplitSizes sizes = ComputeSplitSizes(n, spec);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(DeriveSeed(spec.seed, "split", fold));
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldSplit out;
  out.train_rows.assign(perm.begin(), perm.begin() + sizes.train);
  out.val_rows.assign(perm.begin() + sizes.train,
                      perm.begin() + sizes.train + sizes.val);
  out.test_rows.assign(perm.begin() + sizes.train + sizes.val, perm.end());
  for (auto* rows : {&out.train_rows, &out.val_rows, &out.test_rows}) {
    std::sort(rows->begin(), rows->end());
  }
  out.train = store.Subset(out.train_rows);
  out.val = store.Subset(out.val_rows);
  out.test = store.Subset(out.test_rows);
  return out;
}

SplitSpec SweepSplitSpec(double train_frac, const SplitSpec& base) {
  SplitSpec spec = base;
  spec.train_frac = train_frac;
  spec.val_frac = (1.0 - train_frac) / 2.0;
  spec.test_frac = 1.0 - train_frac - spec.val_frac;
  ValidateSplitSpec(spec);
  return spec;
}

SyntheticData GenSynthetic(const SyntheticSpec& spec) {
  if (spec.n_users == 0 || spec.n_products == 0) {
    throw InvalidArgument("synthetic spec needs users and products");
  }
  if (spec.true_rank < 1 ||
      spec.true_rank > std::min(spec.n_users, spec.n_products)) {
    throw InvalidArgument("true_rank must lie in [1, min(users, products)]");
  }
  if (!(spec.density > 0.0 && spec.density <= 1.0)) {
    throw InvalidArgument("density must lie in (0, 1]");
  }
  if (!(spec.noise_std >= 0.0)) throw InvalidArgument("noise_std must be >= 0");

  SyntheticData data;
  const std::size_t r = spec.true_rank;
  // Entry scale chosen so u . v has standard deviation 1.5, which spreads
  // g(u . v) over most of (0, 1).
  const double sd = std::pow(2.25 / static_cast<double>(r), 0.25);
  Rng factor_rng(DeriveSeed(spec.seed, "synthetic-factors"));
  data.user_factors = DenseMatrix(spec.n_users, r);
  data.product_factors = DenseMatrix(spec.n_products, r);
  data.reliability_factors = DenseMatrix(spec.n_products, r);
  data.user_factors.FillNormal(factor_rng, 0.0, sd);
  data.product_factors.FillNormal(factor_rng, 0.0, sd);
  data.reliability_factors.FillNormal(factor_rng, 0.0, sd);

  KeyIndex users;
  KeyIndex products;
  for (std::size_t i = 0; i < spec.n_users; ++i) {
    users.Intern("u" + std::to_string(i));
  }
  for (std::size_t j = 0; j < spec.n_products; ++j) {
    products.Intern("p" + std::to_string(j));
  }

  Rng rng(DeriveSeed(spec.seed, "synthetic-cells"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> votes(0, 20);
  std::uniform_int_distribution<std::int64_t> offset(0, 5 * 365 * 86400);
  std::vector<ReviewRecord> records;
  ReliabilityMap reliability;
  for (std::size_t i = 0; i < spec.n_users; ++i) {
    for (std::size_t j = 0; j < spec.n_products; ++j) {
      // Every cell consumes the same draws so the mask does not shift the
      // stream for later cells.
      const double keep = unit(rng);
      const double eps = noise(rng);
      const int total = votes(rng);
      const std::int64_t when = offset(rng);
      if (keep >= spec.density) continue;
      const double score = Sigmoid(Dot(data.user_factors.row(i),
                                       data.product_factors.row(j)));
      const double rel = Sigmoid(Dot(data.user_factors.row(i),
                                     data.reliability_factors.row(j)));
      const double raw = 5.0 * (score + spec.noise_std * eps);
      ReviewRecord rec;
      rec.user = static_cast<Index>(i);
      rec.product = static_cast<Index>(j);
      rec.rating = static_cast<int>(std::clamp(std::round(raw), 1.0, 5.0));
      rec.votes_total = total;
      // Votes come from a per-cell stream so their variable draw count
      // cannot disturb the cell stream.
      std::binomial_distribution<int> yes_dist(total, rel);
      Rng vote_rng(DeriveSeed(spec.seed, "synthetic-votes",
                              i * spec.n_products + j));
      rec.helpful_yes = total > 0 ? yes_dist(vote_rng) : 0;
      rec.unix_time = kSyntheticEpoch + when;
      rec.sequence = records.size();
      records.push_back(rec);
      reliability[{rec.user, rec.product}] = rel;
    }
  }
  data.store = BuildStore(std::move(records), std::move(users),
                          std::move(products), reliability);
  return data;
}

void WriteReviewsJsonl(const InteractionStore& store, std::ostream& out) {
  std::vector<ReviewRecord> rows = store.reviews();
  std::sort(rows.begin(), rows.end(),
            [](const ReviewRecord& a, const ReviewRecord& b) {
              return a.sequence < b.sequence;
            });
  for (const auto& r : rows) {
    json j;
    j["reviewerID"] = store.users().Key(r.user);
    j["asin"] = store.products().Key(r.product);
    j["helpful"] = json::array({r.helpful_yes, r.votes_total});
    j["overall"] = static_cast<double>(r.rating);
    j["unixReviewTime"] = r.unix_time;
    out << j.dump() << '\n';
  }
}

std::vector<std::size_t> MakeTower(std::size_t latent_dim,
                                   std::size_t predictive_dim) {
  if (latent_dim == 0 || predictive_dim == 0) {
    throw InvalidArgument("latent and predictive dims must be >= 1");
  }
  if (predictive_dim > 2 * latent_dim) {
    throw InvalidArgument("predictive_dim must not exceed 2K");
  }
  std::vector<std::size_t> widths;
  for (std::size_t w = 2 * latent_dim; w > predictive_dim; w /= 2) {
    widths.push_back(w);
  }
  widths.push_back(predictive_dim);
  ValidateTower(latent_dim, widths);
  return widths;
}

namespace {

class ConfigReader {
 public:
  ConfigReader(const json& obj, std::string where)
      : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) {
      throw InvalidArgument("config: " + where_ + " must be an object");
    }
  }

  bool Has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const json& At(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  template <typename T>
  void Read(const std::string& key, T& out) {
    if (!Has(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config: " + where_ + "." + key +
                            " has the wrong type");
    }
  }

  void Finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (seen_.count(key) == 0) {
        throw InvalidArgument("config: unknown key " + where_ + "." + key);
      }
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig ParseConfig(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  ConfigReader top(root, "config");
  top.Read("seed", c.seed);
  top.Read("deterministic", c.deterministic);
  top.Read("threads", c.threads);
  if (top.Has("data")) {
    ConfigReader r(top.At("data"), "data");
    r.Read("store", c.store_path);
    r.Read("reviews", c.reviews_path);
    r.Read("min_votes", c.min_votes);
    r.Finish();
  }
  if (top.Has("synthetic")) {
    ConfigReader r(top.At("synthetic"), "synthetic");
    SyntheticSpec s;
    r.Read("users", s.n_users);
    r.Read("products", s.n_products);
    r.Read("rank", s.true_rank);
    r.Read("density", s.density);
    r.Read("noise_std", s.noise_std);
    r.Read("seed", s.seed);
    r.Finish();
    c.synthetic = s;
  }
  if (top.Has("split")) {
    ConfigReader r(top.At("split"), "split");
    r.Read("train", c.split.train_frac);
    r.Read("val", c.split.val_frac);
    r.Read("test", c.split.test_frac);
    r.Read("folds", c.split.folds);
    r.Finish();
  }
  std::optional<std::size_t> predictive;
  bool tower_given = false;
  if (top.Has("model")) {
    ConfigReader r(top.At("model"), "model");
    r.Read("latent_dim", c.latent_dim);
    if (r.Has("predictive_dim")) {
      std::size_t p = 0;
      r.Read("predictive_dim", p);
      predictive = p;
    }
    if (r.Has("tower")) {
      r.Read("tower", c.tower);
      tower_given = true;
    }
    r.Read("lambda", c.lambda);
    r.Read("gamma", c.gamma);
    r.Read("pretrain", c.pretrain);
    r.Read("svd_mlp_embeddings", c.svd_mlp_embeddings);
    if (r.Has("mlp_init")) {
      std::string init;
      r.Read("mlp_init", init);
      c.mlp_init = ParseMlpInit(init);
    }
    r.Read("freeze_branches", c.freeze_branches);
    r.Finish();
  }
  if (!tower_given) {
    c.tower = MakeTower(c.latent_dim, predictive.value_or(
                                          std::max<std::size_t>(c.latent_dim / 4, 1)));
  }
  ValidateTower(c.latent_dim, c.tower);
  if (predictive && *predictive != c.tower.back()) {
    throw InvalidArgument("config: predictive_dim disagrees with the tower");
  }
  if (top.Has("training")) {
    ConfigReader r(top.At("training"), "training");
    r.Read("batch", c.batch_size);
    if (r.Has("epochs")) {
      std::size_t e = 0;
      r.Read("epochs", e);
      c.mf_epochs = c.mlp_epochs = c.fusion_epochs = e;
    }
    r.Read("mf_epochs", c.mf_epochs);
    r.Read("mlp_epochs", c.mlp_epochs);
    r.Read("fusion_epochs", c.fusion_epochs);
    r.Read("lr", c.lr);
    r.Read("patience", c.patience);
    r.Finish();
  }
  if (top.Has("reliability")) {
    ConfigReader r(top.At("reliability"), "reliability");
    r.Read("alpha", c.reliability.alpha);
    r.Read("threshold", c.reliability.threshold);
    bool fallback = false;
    r.Read("fallback_helpful_max", fallback);
    if (fallback) c.reliability.denominator = HelpfulDenominator::kMaxHelpful;
    r.Finish();
  }
  if (top.Has("metrics")) {
    ConfigReader r(top.At("metrics"), "metrics");
    r.Read("threshold", c.eval.threshold);
    r.Read("cutoffs", c.eval.cutoffs);
    if (r.Has("ndcg_gain")) {
      std::string g;
      r.Read("ndcg_gain", g);
      if (g == "true") {
        c.eval.gain = NdcgGain::kTrue;
      } else if (g == "predicted") {
        c.eval.gain = NdcgGain::kPredicted;
      } else {
        throw InvalidArgument("config: metrics.ndcg_gain must be true or predicted");
      }
    }
    r.Finish();
  }
  top.Finish();
  c.split.seed = c.seed;
  ValidateSplitSpec(c.split);
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) {
    throw InvalidArgument("config: gamma must lie in [0, 1]");
  }
  if (c.batch_size == 0) throw InvalidArgument("config: batch must be >= 1");
  if (c.threads == 0) c.threads = 1;
  for (std::size_t t : c.eval.cutoffs) {
    if (t == 0) throw InvalidArgument("config: metric cutoffs must be >= 1");
  }
  return c;
}

ExperimentConfig LoadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("config not found: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str());
}

std::uint64_t FoldSeed(std::uint64_t root, std::size_t fold) {
  return DeriveSeed(root, "fold", fold);
}

MfHyperparams MfHyperFor(const ExperimentConfig& config, std::uint64_t seed) {
  MfHyperparams h;
  h.latent_dim = config.latent_dim;
  h.predictive_dim = config.predictive_dim();
  h.lambda = config.lambda;
  h.batch_size = config.batch_size;
  h.epochs = config.mf_epochs;
  h.lr = config.lr;
  h.patience = config.patience;
  h.seed = DeriveSeed(seed, "mf");
  return h;
}

MlpHyperparams MlpHyperFor(const ExperimentConfig& config, std::uint64_t seed) {
  MlpHyperparams h;
  h.latent_dim = config.latent_dim;
  h.tower = config.tower;
  h.batch_size = config.batch_size;
  h.epochs = config.mlp_epochs;
  h.lr = config.lr;
  h.patience = config.patience;
  h.seed = DeriveSeed(seed, "mlp");
  h.svd_embeddings = config.svd_mlp_embeddings;
  h.init = config.mlp_init;
  return h;
}

FusionHyperparams FusionHyperFor(const ExperimentConfig& config,
                                 std::uint64_t seed) {
  FusionHyperparams h;
  h.batch_size = config.batch_size;
  h.epochs = config.fusion_epochs;
  h.lr = config.lr;
  h.patience = config.patience;
  h.seed = DeriveSeed(seed, "fusion");
  h.freeze_branches = config.freeze_branches;
  return h;
}

namespace {

PhaseTiming Summarize(const std::string& phase, const TrainLog& log,
                      std::size_t from, double seconds) {
  return {phase, seconds, log.epochs.size() - from};
}

}  // namespace

PipelineResult TrainPipeline(const InteractionStore& train,
                             const InteractionStore* val,
                             const ExperimentConfig& config,
                             std::uint64_t seed) {
  PipelineResult out;
  const double mean = train.MeanRawRating();
  if (config.pretrain) {
    std::size_t mark = out.log.epochs.size();
    Stopwatch mf_clock;
    MfParams mf = TrainMf(train, MfHyperFor(config, seed), val, &out.log);
    out.timings.push_back(
        Summarize("pretrain-mf", out.log, mark, mf_clock.Seconds()));

    mark = out.log.epochs.size();
    Stopwatch mlp_clock;
    MlpParams mlp = TrainMlp(train, MlpHyperFor(config, seed), val, &out.log);
    out.timings.push_back(
        Summarize("pretrain-mlp", out.log, mark, mlp_clock.Seconds()));

    out.model = InitFusion(mf, mlp, config.gamma, mean);
    mark = out.log.epochs.size();
    Stopwatch fusion_clock;
    TrainFusion(out.model, train, FusionHyperFor(config, seed), val, &out.log);
    out.timings.push_back(
        Summarize("fusion", out.log, mark, fusion_clock.Seconds()));
  } else {
    out.model = InitFusionRandom(train.n_users(), train.n_products(),
                                 config.latent_dim, config.tower, mean,
                                 DeriveSeed(seed, "random-init"), config.mlp_init);
    out.model.gamma = config.gamma;
    FusionHyperparams h = FusionHyperFor(config, seed);
    // Same total epoch budget as the pre-trained pipeline.
    h.epochs = config.mf_epochs + config.mlp_epochs + config.fusion_epochs;
    const std::size_t mark = out.log.epochs.size();
    Stopwatch clock;
    TrainFusion(out.model, train, h, val, &out.log);
    out.timings.push_back(Summarize("fusion", out.log, mark, clock.Seconds()));
  }
  return out;
}

EvalReport EvaluateModel(const FusionModel& model,
                         const InteractionStore& test,
                         const EvalOptions& options) {
  const auto& ratings = test.ratings();
  std::vector<Index> users;
  std::vector<Index> products;
  std::vector<double> pred;
  std::vector<double> truth;
  users.reserve(ratings.size());
  products.reserve(ratings.size());
  pred.reserve(ratings.size());
  truth.reserve(ratings.size());
  std::vector<PairRequest> requests;
  requests.reserve(ratings.size());
  for (const auto& r : ratings) {
    users.push_back(r.user);
    products.push_back(r.product);
    truth.push_back(static_cast<double>(r.raw));
    requests.push_back({r.user, r.product});
  }
  pred = PredictBatch(model, requests);
  return Evaluate(users, products, pred, truth, options);
}

InteractionStore LoadExperimentData(const ExperimentConfig& config) {
  InteractionStore store;
  if (!config.store_path.empty()) {
    store = LoadStoreFile(config.store_path);
  } else if (!config.reviews_path.empty()) {
    ParseOptions opts;
    opts.min_votes = config.min_votes;
    store = BuildStore(ParseReviewsFile(config.reviews_path, opts));
  } else if (config.synthetic) {
    return GenSynthetic(*config.synthetic).store;
  } else {
    throw InvalidArgument("config names no data source");
  }
  if (store.reliability().empty() && !store.reviews().empty()) {
    store = store.WithReliability(
        ToReliabilityMap(ScoreStore(store, config.reliability)));
  }
  return store;
}

namespace {

FoldResult RunFold(const InteractionStore& store,
                   const ExperimentConfig& config, std::size_t fold) {
  FoldResult out;
  out.fold = fold;
  try {
    const FoldSplit split = SplitFold(store, config.split, fold);
    PipelineResult trained =
        TrainPipeline(split.train, &split.val, config,
                      FoldSeed(config.seed, fold));
    out.report = EvaluateModel(trained.model, split.test, config.eval);
    out.timings = std::move(trained.timings);
    out.log = std::move(trained.log);
    out.ok = true;
  } catch (const Error& e) {
    out.error = std::string(CategoryName(e.category())) + ": " + e.what();
  } catch (const std::exception& e) {
    out.error = std::string("internal: ") + e.what();
  }
  return out;
}

}  // namespace

ExperimentResult RunExperiment(const InteractionStore& store,
                               const ExperimentConfig& config) {
  ValidateSplitSpec(config.split);
  ExperimentResult result;
  result.folds.resize(config.split.folds);
  const std::size_t workers =
      std::min<std::size_t>(std::max<std::size_t>(config.threads, 1),
                            config.split.folds);
  if (workers <= 1) {
    for (std::size_t f = 0; f < config.split.folds; ++f) {
      result.folds[f] = RunFold(store, config, f);
    }
  } else {
    // Each fold is self-contained, so results depend only on the fold
    // index regardless of scheduling.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t f = next++; f < config.split.folds; f = next++) {
          result.folds[f] = RunFold(store, config, f);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<EvalReport> ok;
  for (const auto& f : result.folds) {
    if (f.ok) ok.push_back(f.report);
  }
  if (!ok.empty()) result.mean = MeanReport(ok);
  return result;
}

std::vector<SweepPoint> Sweep(const InteractionStore& store,
                              const ExperimentConfig& config,
                              const std::vector<double>& train_fracs) {
  std::vector<SweepPoint> out;
  for (double x : train_fracs) {
    ExperimentConfig c = config;
    c.split = SweepSplitSpec(x, config.split);
    out.push_back({x, RunExperiment(store, c)});
  }
  return out;
}

void WriteExperiment(const ExperimentResult& result, std::ostream& out,
                     bool with_timings) {
  const EvalReport* any = nullptr;
  for (const auto& f : result.folds) {
    if (f.ok) {
      any = &f.report;
      break;
    }
  }
  if (any != nullptr) out << ReportTsvHeader(*any) << '\n';
  for (const auto& f : result.folds) {
    if (f.ok) {
      out << ReportTsvRow(f.report, "fold" + std::to_string(f.fold)) << '\n';
    } else {
      out << "fold" << f.fold << "\tFAILED\t" << f.error << '\n';
    }
  }
  if (result.mean) out << ReportTsvRow(*result.mean, "mean") << '\n';
  if (!with_timings) return;
  for (const auto& f : result.folds) {
    for (const auto& t : f.timings) {
      out << "# fold" << f.fold << ' ' << t.phase << " epochs=" << t.epochs
          << " seconds=" << std::fixed << std::setprecision(3) << t.seconds
          << std::defaultfloat << '\n';
    }
  }
}

}  // namespace fdmf
