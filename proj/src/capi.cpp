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

#include "fusiondeepmf/fdmf.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "fusiondeepmf/checkpoint.hpp"
#include "fusiondeepmf/errors.hpp"
#include "fusiondeepmf/harness.hpp"
#include "fusiondeepmf/reliability.hpp"

struct fdmf_store {
  fdmf::InteractionStore store;
  std::size_t warnings = 0;
  std::size_t filtered = 0;
};

struct fdmf_config {
  fdmf::ExperimentConfig config;
};

struct fdmf_model {
  fdmf::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
fdmf_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void Log(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_fn != nullptr) g_log_fn(line.c_str(), g_log_user);
}

fdmf_status StatusOf(fdmf::ErrorCategory c) {
  switch (c) {
    case fdmf::ErrorCategory::kInvalidArgument: return FDMF_E_INVALID_ARGUMENT;
    case fdmf::ErrorCategory::kIo: return FDMF_E_IO;
    case fdmf::ErrorCategory::kParse: return FDMF_E_PARSE;
    case fdmf::ErrorCategory::kNotFound: return FDMF_E_NOT_FOUND;
    case fdmf::ErrorCategory::kDiverged: return FDMF_E_DIVERGED;
    case fdmf::ErrorCategory::kInternal: return FDMF_E_INTERNAL;
  }
  return FDMF_E_INTERNAL;
}

template <typename F>
fdmf_status Guard(F&& body) {
  try {
    body();
    return FDMF_OK;
  } catch (const fdmf::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.category());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FDMF_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FDMF_E_INTERNAL;
  }
}

void Require(const void* p, const char* what) {
  if (p == nullptr) {
    throw fdmf::InvalidArgument(std::string(what) + " must not be null");
  }
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void EmitLog(const fdmf::TrainLog& log, bool with_seconds) {
  for (const auto& e : log.epochs) {
    std::ostringstream line;
    line << e.phase << " epoch=" << (e.epoch + 1) << " loss=" << e.train_loss
         << " val_mae=" << e.val_mae;
    if (with_seconds) line << " seconds=" << e.seconds;
    Log(line.str());
  }
}

std::vector<std::size_t> ParseSizeList(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(item, &pos);
    if (pos != item.size()) throw std::invalid_argument(item);
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw std::invalid_argument(text);
  return out;
}

bool ParseBool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument(v);
}

double ParseDouble(const std::string& v) {
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return d;
}

std::uint64_t ParseUint(const std::string& v) {
  std::size_t pos = 0;
  if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
  const unsigned long long u = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return u;
}

void SetField(fdmf::ExperimentConfig& c, const std::string& key,
              const std::string& v) {
  if (key == "seed") {
    c.seed = ParseUint(v);
    c.split.seed = c.seed;
  } else if (key == "deterministic") {
    c.deterministic = ParseBool(v);
  } else if (key == "threads") {
    c.threads = std::max<std::size_t>(ParseUint(v), 1);
  } else if (key == "latent_dim") {
    const std::size_t p = c.tower.back();
    c.latent_dim = ParseUint(v);
    c.tower = fdmf::MakeTower(c.latent_dim, std::min(p, 2 * c.latent_dim));
  } else if (key == "predictive_dim") {
    c.tower = fdmf::MakeTower(c.latent_dim, ParseUint(v));
  } else if (key == "tower") {
    auto t = ParseSizeList(v);
    fdmf::ValidateTower(c.latent_dim, t);
    c.tower = std::move(t);
  } else if (key == "lambda") {
    c.lambda = ParseDouble(v);
  } else if (key == "gamma") {
    c.gamma = ParseDouble(v);
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) {
      throw fdmf::InvalidArgument("gamma must lie in [0, 1]");
    }
  } else if (key == "pretrain") {
    c.pretrain = ParseBool(v);
  } else if (key == "svd_mlp_embeddings") {
    c.svd_mlp_embeddings = ParseBool(v);
  } else if (key == "mlp_init") {
    c.mlp_init = fdmf::ParseMlpInit(v);
  } else if (key == "freeze_branches") {
    c.freeze_branches = ParseBool(v);
  } else if (key == "batch") {
    c.batch_size = std::max<std::size_t>(ParseUint(v), 1);
  } else if (key == "epochs") {
    c.mf_epochs = c.mlp_epochs = c.fusion_epochs = ParseUint(v);
  } else if (key == "mf_epochs") {
    c.mf_epochs = ParseUint(v);
  } else if (key == "mlp_epochs") {
    c.mlp_epochs = ParseUint(v);
  } else if (key == "fusion_epochs") {
    c.fusion_epochs = ParseUint(v);
  } else if (key == "lr") {
    c.lr = ParseDouble(v);
  } else if (key == "patience") {
    c.patience = ParseUint(v);
  } else if (key == "folds") {
    c.split.folds = ParseUint(v);
  } else if (key == "train") {
    c.split.train_frac = ParseDouble(v);
  } else if (key == "val") {
    c.split.val_frac = ParseDouble(v);
  } else if (key == "test") {
    c.split.test_frac = ParseDouble(v);
  } else if (key == "alpha") {
    c.reliability.alpha = ParseDouble(v);
  } else if (key == "threshold") {
    c.reliability.threshold = ParseDouble(v);
  } else if (key == "fallback_helpful_max") {
    c.reliability.denominator = ParseBool(v)
                                    ? fdmf::HelpfulDenominator::kMaxHelpful
                                    : fdmf::HelpfulDenominator::kTotalVotes;
  } else if (key == "metric_threshold") {
    c.eval.threshold = ParseDouble(v);
  } else if (key == "cutoffs") {
    c.eval.cutoffs = ParseSizeList(v);
    for (std::size_t t : c.eval.cutoffs) {
      if (t == 0) throw fdmf::InvalidArgument("cutoffs must be >= 1");
    }
  } else if (key == "ndcg_gain") {
    if (v == "true") {
      c.eval.gain = fdmf::NdcgGain::kTrue;
    } else if (v == "predicted") {
      c.eval.gain = fdmf::NdcgGain::kPredicted;
    } else {
      throw fdmf::InvalidArgument("ndcg_gain must be true or predicted");
    }
  } else {
    throw fdmf::InvalidArgument("unknown config key " + key);
  }
}

void CheckSameKeys(const fdmf::Checkpoint& ckpt,
                   const fdmf::InteractionStore& store) {
  if (!(ckpt.users == store.users()) || !(ckpt.products == store.products())) {
    throw fdmf::InvalidArgument(
        "model was trained on a different store (key maps differ)");
  }
}

fdmf::FoldSplit SplitFor(const fdmf::InteractionStore& store,
                         const fdmf::ExperimentConfig& config,
                         std::size_t fold) {
  return fdmf::SplitFold(store, config.split, fold);
}

}  // namespace

extern "C" {

const char* fdmf_version(void) { return "0.1.0"; }

const char* fdmf_last_error(void) { return g_last_error.c_str(); }

const char* fdmf_status_name(fdmf_status status) {
  switch (status) {
    case FDMF_OK: return "ok";
    case FDMF_E_INVALID_ARGUMENT: return "invalid-argument";
    case FDMF_E_IO: return "io";
    case FDMF_E_PARSE: return "parse";
    case FDMF_E_NOT_FOUND: return "not-found";
    case FDMF_E_DIVERGED: return "diverged";
    case FDMF_E_INTERNAL: return "internal";
  }
  return "unknown";
}

void fdmf_string_free(char* s) { std::free(s); }

void fdmf_set_log(fdmf_log_fn fn, void* user_data) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user_data;
}

fdmf_status fdmf_store_ingest(const char* reviews_path, int64_t min_votes,
                              fdmf_store** out) {
  return Guard([&] {
    Require(reviews_path, "reviews_path");
    Require(out, "out");
    fdmf::ParseOptions opts;
    opts.min_votes = min_votes;
    fdmf::ParseResult parsed = fdmf::ParseReviewsFile(reviews_path, opts);
    for (const auto& w : parsed.warnings) {
      Log("warning: line " + std::to_string(w.line) + ": " + w.message);
    }
    auto handle = std::make_unique<fdmf_store>();
    handle->warnings = parsed.warnings.size();
    handle->filtered = parsed.filtered;
    handle->store = fdmf::BuildStore(std::move(parsed));
    *out = handle.release();
  });
}

fdmf_status fdmf_store_load(const char* path, fdmf_store** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    auto handle = std::make_unique<fdmf_store>();
    handle->store = fdmf::LoadStoreFile(path);
    *out = handle.release();
  });
}

fdmf_status fdmf_store_save(const fdmf_store* store, const char* path) {
  return Guard([&] {
    Require(store, "store");
    Require(path, "path");
    fdmf::SaveStoreFile(store->store, path);
  });
}

fdmf_status fdmf_store_write_reviews(const fdmf_store* store,
                                     const char* path) {
  return Guard([&] {
    Require(store, "store");
    Require(path, "path");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw fdmf::IoError(std::string("cannot open ") + path);
    fdmf::WriteReviewsJsonl(store->store, out);
    out.flush();
    if (!out) throw fdmf::IoError(std::string("failed writing ") + path);
  });
}

fdmf_status fdmf_store_counts(const fdmf_store* store, size_t* n_users,
                              size_t* n_products, size_t* n_ratings,
                              size_t* n_reliability) {
  return Guard([&] {
    Require(store, "store");
    if (n_users) *n_users = store->store.n_users();
    if (n_products) *n_products = store->store.n_products();
    if (n_ratings) *n_ratings = store->store.ratings().size();
    if (n_reliability) *n_reliability = store->store.reliability().size();
  });
}

fdmf_status fdmf_store_ingest_stats(const fdmf_store* store,
                                    size_t* n_warnings, size_t* n_filtered) {
  return Guard([&] {
    Require(store, "store");
    if (n_warnings) *n_warnings = store->warnings;
    if (n_filtered) *n_filtered = store->filtered;
  });
}

void fdmf_store_free(fdmf_store* store) { delete store; }

fdmf_status fdmf_synth(size_t n_users, size_t n_products, size_t rank,
                       double density, double noise_std, uint64_t seed,
                       fdmf_store** out) {
  return Guard([&] {
    Require(out, "out");
    fdmf::SyntheticSpec spec;
    spec.n_users = n_users;
    spec.n_products = n_products;
    spec.true_rank = rank;
    spec.density = density;
    spec.noise_std = noise_std;
    spec.seed = seed;
    auto handle = std::make_unique<fdmf_store>();
    handle->store = fdmf::GenSynthetic(spec).store;
    *out = handle.release();
  });
}

fdmf_status fdmf_reliability(const fdmf_store* store, double alpha,
                             double threshold, int fallback_max,
                             const char* breakdown_path, fdmf_store** out) {
  return Guard([&] {
    Require(store, "store");
    Require(out, "out");
    fdmf::ReliabilityOptions opts;
    opts.alpha = alpha;
    opts.threshold = threshold;
    if (fallback_max) opts.denominator = fdmf::HelpfulDenominator::kMaxHelpful;
    const auto rows = fdmf::ScoreStore(store->store, opts);
    if (breakdown_path != nullptr) {
      std::ofstream file(breakdown_path, std::ios::trunc);
      if (!file) throw fdmf::IoError(std::string("cannot open ") + breakdown_path);
      fdmf::WriteBreakdown(rows, store->store, file);
      file.flush();
      if (!file) throw fdmf::IoError(std::string("failed writing ") + breakdown_path);
    }
    auto handle = std::make_unique<fdmf_store>();
    handle->store = store->store.WithReliability(fdmf::ToReliabilityMap(rows));
    *out = handle.release();
  });
}

fdmf_status fdmf_config_default(fdmf_config** out) {
  return Guard([&] {
    Require(out, "out");
    *out = new fdmf_config();
  });
}

fdmf_status fdmf_config_load(const char* path, fdmf_config** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    auto handle = std::make_unique<fdmf_config>();
    handle->config = fdmf::LoadConfigFile(path);
    *out = handle.release();
  });
}

fdmf_status fdmf_config_parse(const char* json_text, fdmf_config** out) {
  return Guard([&] {
    Require(json_text, "json_text");
    Require(out, "out");
    auto handle = std::make_unique<fdmf_config>();
    handle->config = fdmf::ParseConfig(json_text);
    *out = handle.release();
  });
}

fdmf_status fdmf_config_set(fdmf_config* config, const char* key,
                            const char* value) {
  return Guard([&] {
    Require(config, "config");
    Require(key, "key");
    Require(value, "value");
    fdmf::ExperimentConfig updated = config->config;
    try {
      SetField(updated, key, value);
    } catch (const std::invalid_argument&) {
      throw fdmf::InvalidArgument(std::string("bad value for ") + key + ": " +
                                  value);
    } catch (const std::out_of_range&) {
      throw fdmf::InvalidArgument(std::string("value out of range for ") +
                                  key + ": " + value);
    }
    config->config = std::move(updated);
  });
}

void fdmf_config_free(fdmf_config* config) { delete config; }

fdmf_status fdmf_config_load_data(const fdmf_config* config,
                                  fdmf_store** out) {
  return Guard([&] {
    Require(config, "config");
    Require(out, "out");
    auto handle = std::make_unique<fdmf_store>();
    handle->store = fdmf::LoadExperimentData(config->config);
    *out = handle.release();
  });
}

fdmf_status fdmf_pretrain(const fdmf_store* store, const fdmf_config* config,
                          fdmf_model_kind kind, size_t fold,
                          fdmf_model** out) {
  return Guard([&] {
    Require(store, "store");
    Require(config, "config");
    Require(out, "out");
    const auto& c = config->config;
    const fdmf::FoldSplit split = SplitFor(store->store, c, fold);
    const std::uint64_t seed = fdmf::FoldSeed(c.seed, fold);
    auto handle = std::make_unique<fdmf_model>();
    auto& ckpt = handle->ckpt;
    ckpt.users = store->store.users();
    ckpt.products = store->store.products();
    ckpt.model.gamma = c.gamma;
    ckpt.model.global_mean_raw = split.train.MeanRawRating();
    fdmf::TrainLog log;
    if (kind == FDMF_MODEL_MF) {
      ckpt.kind = fdmf::ModelKind::kMf;
      ckpt.model.mf =
          fdmf::TrainMf(split.train, fdmf::MfHyperFor(c, seed), &split.val, &log);
    } else if (kind == FDMF_MODEL_MLP) {
      ckpt.kind = fdmf::ModelKind::kMlp;
      ckpt.model.mlp = fdmf::TrainMlp(split.train, fdmf::MlpHyperFor(c, seed),
                                      &split.val, &log);
    } else {
      throw fdmf::InvalidArgument("pretrain kind must be mf or mlp");
    }
    EmitLog(log, !c.deterministic);
    *out = handle.release();
  });
}

fdmf_status fdmf_train(const fdmf_store* store, const fdmf_config* config,
                       size_t fold, const fdmf_model* mf,
                       const fdmf_model* mlp, fdmf_model** out) {
  return Guard([&] {
    Require(store, "store");
    Require(config, "config");
    Require(out, "out");
    if ((mf == nullptr) != (mlp == nullptr)) {
      throw fdmf::InvalidArgument("pass both branch checkpoints or neither");
    }
    const auto& c = config->config;
    const fdmf::FoldSplit split = SplitFor(store->store, c, fold);
    const std::uint64_t seed = fdmf::FoldSeed(c.seed, fold);
    auto handle = std::make_unique<fdmf_model>();
    auto& ckpt = handle->ckpt;
    ckpt.kind = fdmf::ModelKind::kFusion;
    ckpt.users = store->store.users();
    ckpt.products = store->store.products();
    fdmf::TrainLog log;
    if (mf != nullptr) {
      if (mf->ckpt.kind != fdmf::ModelKind::kMf ||
          mlp->ckpt.kind != fdmf::ModelKind::kMlp) {
        throw fdmf::InvalidArgument("expected an mf and an mlp checkpoint");
      }
      CheckSameKeys(mf->ckpt, store->store);
      CheckSameKeys(mlp->ckpt, store->store);
      ckpt.model = fdmf::InitFusion(mf->ckpt.model.mf, mlp->ckpt.model.mlp,
                                    c.gamma, split.train.MeanRawRating());
      fdmf::TrainFusion(ckpt.model, split.train, fdmf::FusionHyperFor(c, seed),
                        &split.val, &log);
    } else {
      fdmf::PipelineResult r =
          fdmf::TrainPipeline(split.train, &split.val, c, seed);
      ckpt.model = std::move(r.model);
      log = std::move(r.log);
    }
    EmitLog(log, !c.deterministic);
    *out = handle.release();
  });
}

fdmf_status fdmf_model_load(const char* path, fdmf_model** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    auto handle = std::make_unique<fdmf_model>();
    handle->ckpt = fdmf::LoadCheckpointFile(path);
    *out = handle.release();
  });
}

fdmf_status fdmf_model_save(const fdmf_model* model, const char* path) {
  return Guard([&] {
    Require(model, "model");
    Require(path, "path");
    fdmf::SaveCheckpointFile(model->ckpt, path);
  });
}

fdmf_status fdmf_model_kind_of(const fdmf_model* model, fdmf_model_kind* out) {
  return Guard([&] {
    Require(model, "model");
    Require(out, "out");
    *out = static_cast<fdmf_model_kind>(model->ckpt.kind);
  });
}

void fdmf_model_free(fdmf_model* model) { delete model; }

fdmf_status fdmf_predict(const fdmf_model* model, const char* user_key,
                         const char* product_key, double* out) {
  return Guard([&] {
    Require(model, "model");
    Require(user_key, "user_key");
    Require(product_key, "product_key");
    Require(out, "out");
    *out = fdmf::PredictKeys(model->ckpt, user_key, product_key);
  });
}

fdmf_status fdmf_evaluate(const fdmf_model* model, const fdmf_store* store,
                          const fdmf_config* config, size_t fold,
                          fdmf_format format, char** out_text) {
  return Guard([&] {
    Require(model, "model");
    Require(store, "store");
    Require(config, "config");
    Require(out_text, "out_text");
    CheckSameKeys(model->ckpt, store->store);
    const auto& c = config->config;
    const fdmf::FoldSplit split = SplitFor(store->store, c, fold);
    std::vector<fdmf::Index> users;
    std::vector<fdmf::Index> products;
    std::vector<double> pred;
    std::vector<double> truth;
    for (const auto& r : split.test.ratings()) {
      users.push_back(r.user);
      products.push_back(r.product);
      pred.push_back(fdmf::PredictIndices(model->ckpt, r.user, r.product));
      truth.push_back(static_cast<double>(r.raw));
    }
    const fdmf::EvalReport report =
        fdmf::Evaluate(users, products, pred, truth, c.eval);
    std::ostringstream text;
    if (format == FDMF_FORMAT_KEY_VALUE) {
      fdmf::WriteReportKeyValue(report, text);
    } else {
      text << fdmf::ReportTsvHeader(report) << '\n'
           << fdmf::ReportTsvRow(report, "fold" + std::to_string(fold))
           << '\n';
    }
    *out_text = CopyString(text.str());
  });
}

fdmf_status fdmf_run_experiment(const fdmf_store* store,
                                const fdmf_config* config, int with_timings,
                                char** out_text) {
  return Guard([&] {
    Require(store, "store");
    Require(config, "config");
    Require(out_text, "out_text");
    const auto result = fdmf::RunExperiment(store->store, config->config);
    for (const auto& f : result.folds) {
      if (!f.ok) Log("fold " + std::to_string(f.fold) + " failed: " + f.error);
    }
    if (!result.mean) {
      throw fdmf::Error(fdmf::ErrorCategory::kInternal,
                        "every fold failed; first: " + result.folds[0].error);
    }
    std::ostringstream text;
    fdmf::WriteExperiment(result, text, with_timings != 0);
    *out_text = CopyString(text.str());
  });
}

fdmf_status fdmf_sweep(const fdmf_store* store, const fdmf_config* config,
                       const double* train_fracs, size_t n_fracs,
                       char** out_text) {
  return Guard([&] {
    Require(store, "store");
    Require(config, "config");
    Require(out_text, "out_text");
    if (n_fracs == 0) throw fdmf::InvalidArgument("no training fractions");
    Require(train_fracs, "train_fracs");
    const std::vector<double> fracs(train_fracs, train_fracs + n_fracs);
    const auto points = fdmf::Sweep(store->store, config->config, fracs);
    std::ostringstream text;
    bool header = false;
    for (const auto& p : points) {
      if (!p.result.mean) {
        text << "train=" << p.train_frac << "\tFAILED\n";
        continue;
      }
      if (!header) {
        text << fdmf::ReportTsvHeader(*p.result.mean) << '\n';
        header = true;
      }
      std::ostringstream label;
      label << "train=" << p.train_frac;
      text << fdmf::ReportTsvRow(*p.result.mean, label.str()) << '\n';
    }
    *out_text = CopyString(text.str());
  });
}

}  // extern "C"
