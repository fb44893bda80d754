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

// fdmf: command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fusiondeepmf/fdmf.h"

namespace {

// Data errors surface as exit code 1 with a machine-readable category.
struct Failure {
  fdmf_status status;
  std::string message;
};

void Check(fdmf_status s) {
  if (s != FDMF_OK) throw Failure{s, fdmf_last_error()};
}

struct StoreDeleter {
  void operator()(fdmf_store* s) const { fdmf_store_free(s); }
};
struct ConfigDeleter {
  void operator()(fdmf_config* c) const { fdmf_config_free(c); }
};
struct ModelDeleter {
  void operator()(fdmf_model* m) const { fdmf_model_free(m); }
};
using StorePtr = std::unique_ptr<fdmf_store, StoreDeleter>;
using ConfigPtr = std::unique_ptr<fdmf_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<fdmf_model, ModelDeleter>;

struct OwnedText {
  char* text = nullptr;
  ~OwnedText() { fdmf_string_free(text); }
};

void LogToStderr(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
}

// Settings shared by every subcommand.
struct Globals {
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::size_t> threads;
  std::string config_path;
  bool quiet = false;
};

std::string Text(const std::string& v) { return v; }
std::string Text(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}
std::string Text(std::size_t v) { return std::to_string(v); }

// Per-subcommand overrides, applied on top of the config file.
struct Overrides {
  std::vector<std::pair<std::string, std::string>> values;

  // The typed callback makes CLI11 reject malformed values as usage errors.
  template <typename T>
  void Add(CLI::App* cmd, const std::string& flag, const std::string& key,
           const std::string& help) {
    cmd->add_option_function<T>(
        flag, [this, key](const T& v) { values.emplace_back(key, Text(v)); },
        help);
  }
  void AddFlag(CLI::App* cmd, const std::string& flag, const std::string& key,
               const std::string& value, const std::string& help) {
    cmd->add_flag_callback(flag, [this, key, value] {
      values.emplace_back(key, value);
    }, help);
  }
};

ConfigPtr MakeConfig(const Globals& g, const Overrides& o) {
  fdmf_config* raw = nullptr;
  std::string path = g.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("FDMF_CONFIG")) path = env;
  }
  if (path.empty()) {
    Check(fdmf_config_default(&raw));
  } else {
    Check(fdmf_config_load(path.c_str(), &raw));
  }
  ConfigPtr config(raw);
  if (g.seed) Check(fdmf_config_set(raw, "seed", std::to_string(*g.seed).c_str()));
  if (g.deterministic) Check(fdmf_config_set(raw, "deterministic", "true"));
  if (g.threads) {
    Check(fdmf_config_set(raw, "threads", std::to_string(*g.threads).c_str()));
  }
  for (const auto& [key, value] : o.values) {
    Check(fdmf_config_set(raw, key.c_str(), value.c_str()));
  }
  return config;
}

StorePtr LoadStore(const std::string& path, const fdmf_config* config) {
  fdmf_store* raw = nullptr;
  if (!path.empty()) {
    Check(fdmf_store_load(path.c_str(), &raw));
  } else {
    Check(fdmf_config_load_data(config, &raw));
  }
  return StorePtr(raw);
}

ModelPtr LoadModel(const std::string& path) {
  fdmf_model* raw = nullptr;
  Check(fdmf_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

void WriteText(const std::string& path, const char* text) {
  if (path.empty() || path == "-") {
    std::fputs(text, stdout);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Failure{FDMF_E_IO, "cannot open " + path + " for writing"};
  out << text;
  if (!out) throw Failure{FDMF_E_IO, "failed writing " + path};
}

void AddModelOverrides(CLI::App* cmd, Overrides& o) {
  o.Add<std::size_t>(cmd, "--latent-dim", "latent_dim", "Latent dimension K");
  o.Add<std::size_t>(cmd, "--predictive-dim", "predictive_dim",
                     "Predictive factors p (last tower width)");
  o.Add<std::string>(cmd, "--tower", "tower",
                     "Hidden tower widths, comma separated (e.g. 512,256,128,64)");
  o.Add<double>(cmd, "--lambda", "lambda", "Regularization weight");
  o.Add<std::string>(cmd, "--mlp-init", "mlp_init",
                     "MLP weight init: scaled (default) or small (all 0.01)");
  o.Add<std::size_t>(cmd, "--epochs", "epochs", "Epochs per training phase");
  o.Add<std::size_t>(cmd, "--batch", "batch", "Mini-batch size");
  o.Add<double>(cmd, "--lr", "lr", "Adam learning rate");
  o.Add<std::size_t>(cmd, "--patience", "patience",
                     "Early-stopping patience in epochs");
  o.Add<std::size_t>(cmd, "--folds", "folds", "Number of cross-validation folds");
  o.Add<double>(cmd, "--train-frac", "train", "Training fraction");
  o.Add<double>(cmd, "--val-frac", "val", "Validation fraction");
  o.Add<double>(cmd, "--test-frac", "test", "Test fraction");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reliability-aware fused MF/MLP rating predictor"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Root seed; all randomness derives from it");
  app.add_flag("--deterministic", g.deterministic,
               "Byte-reproducible outputs (omits wall-clock figures)");
  app.add_option("--threads", g.threads, "Maximum worker threads (folds)");
  app.add_option("--config", g.config_path,
                 "JSON config file (default: $FDMF_CONFIG)");
  app.add_flag("--quiet", g.quiet, "Suppress epoch logs and warnings");

  Overrides o;
  std::string input, out, store_path, store_out, model_path, mf_path, mlp_path;
  std::string pairs_path = "-", format = "tsv", reviews_out;
  std::int64_t min_votes = 0;
  std::size_t fold = 0;
  double alpha = 0.5, threshold = 0.5;
  bool fallback_max = false, per_fold = false;
  std::size_t users = 50, products = 40, rank = 2;
  double density = 0.3, noise = 0.05;
  std::vector<double> fracs = {0.4, 0.5, 0.6, 0.7};

  auto* ingest = app.add_subcommand("ingest", "Parse line-delimited reviews into a store");
  ingest->add_option("--input", input, "Reviews file (one JSON object per line)")
      ->required();
  ingest->add_option("--out", out, "Store file to write")->required();
  ingest->add_option("--min-votes", min_votes,
                     "Drop reviews with fewer total helpfulness votes");

  auto* rel = app.add_subcommand("reliability", "Score reviewer reliability");
  rel->add_option("--store", store_path, "Input store")->required();
  rel->add_option("--out", out, "Breakdown table (user product h most top d rel label)")
      ->required();
  rel->add_option("--store-out", store_out,
                  "Also write a copy of the store carrying the scores");
  rel->add_option("--alpha", alpha, "Weight of the top-ranking score in d");
  rel->add_option("--threshold", threshold, "Reliable when rel >= threshold");
  rel->add_flag("--fallback-helpful-max", fallback_max,
                "Divide helpful votes by the product's maximum instead of the review's total");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic store with known factors");
  synth->add_option("--users", users, "Number of users");
  synth->add_option("--products", products, "Number of products");
  synth->add_option("--rank", rank, "Rank of the generating model");
  synth->add_option("--density", density, "Observed fraction of cells");
  synth->add_option("--noise", noise, "Rating noise std on the rating/5 scale");
  synth->add_option("--out", out, "Store file to write (default synthetic.store)");
  synth->add_option("--reviews-out", reviews_out,
                    "Also write the reviews as line-delimited JSON");

  auto* pmf = app.add_subcommand("pretrain-mf", "Pre-train the matrix factorization branch");
  auto* pmlp = app.add_subcommand("pretrain-mlp", "Pre-train the MLP branch");
  for (auto* cmd : {pmf, pmlp}) {
    cmd->add_option("--store", store_path, "Store (default: config data source)");
    cmd->add_option("--out", out, "Checkpoint to write")->required();
    cmd->add_option("--fold", fold, "Split fold to train on");
    AddModelOverrides(cmd, o);
  }
  o.AddFlag(pmlp, "--svd-embeddings", "svd_mlp_embeddings", "true",
            "Seed embedding tables from SVD factors");

  auto* train = app.add_subcommand("train", "Train the fused model");
  train->add_option("--store", store_path, "Store (default: config data source)");
  train->add_option("--out", out, "Checkpoint to write")->required();
  train->add_option("--fold", fold, "Split fold to train on");
  train->add_option("--mf", mf_path, "Pre-trained MF checkpoint");
  train->add_option("--mlp", mlp_path, "Pre-trained MLP checkpoint");
  AddModelOverrides(train, o);
  o.Add<double>(train, "--gamma", "gamma", "Branch trade-off at fusion init");
  o.AddFlag(train, "--no-pretrain", "pretrain", "false",
            "Random initialization instead of pre-trained branches");
  o.AddFlag(train, "--freeze-branches", "freeze_branches", "true",
            "Train only the fusion head");

  auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on a fold's test split");
  eval->add_option("--model", model_path, "Checkpoint")->required();
  eval->add_option("--store", store_path, "Store (default: config data source)");
  eval->add_option("--fold", fold, "Split fold");
  eval->add_option("--format", format, "tsv or kv")
      ->check(CLI::IsMember({"tsv", "kv"}));
  eval->add_option("--out", out, "Report file (default stdout)");
  o.Add<std::string>(eval, "--ndcg-gain", "ndcg_gain",
                     "Gain in DCG: true (default) or predicted");
  o.Add<std::string>(eval, "--cutoffs", "cutoffs", "Top-t cutoffs, comma separated");
  for (auto* cmd : {eval}) {
    o.Add<std::size_t>(cmd, "--folds", "folds", "Number of folds used for the split");
    o.Add<double>(cmd, "--train-frac", "train", "Training fraction");
    o.Add<double>(cmd, "--val-frac", "val", "Validation fraction");
    o.Add<double>(cmd, "--test-frac", "test", "Test fraction");
  }

  auto* predict = app.add_subcommand("predict", "Predict ratings for (user, product) pairs");
  predict->add_option("--model", model_path, "Checkpoint")->required();
  predict->add_option("--pairs", pairs_path,
                      "Tab-separated user and product keys, one pair per line (- = stdin)");
  predict->add_option("--out", out, "Output file (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Cross-validated runs over training fractions");
  sweep->add_option("--store", store_path, "Store (default: config data source)");
  sweep->add_option("--fracs", fracs, "Training fractions; val and test get (1-x)/2 each")
      ->delimiter(',');
  sweep->add_flag("--per-fold", per_fold,
                  "Print every fold plus timings for the last fraction");
  sweep->add_option("--out", out, "Report file (default stdout)");
  AddModelOverrides(sweep, o);
  o.Add<double>(sweep, "--gamma", "gamma", "Branch trade-off at fusion init");
  o.AddFlag(sweep, "--no-pretrain", "pretrain", "false",
            "Random initialization instead of pre-trained branches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (!g.quiet) fdmf_set_log(&LogToStderr, nullptr);

  try {
    if (*ingest) {
      fdmf_store* raw = nullptr;
      Check(fdmf_store_ingest(input.c_str(), min_votes, &raw));
      StorePtr store(raw);
      Check(fdmf_store_save(store.get(), out.c_str()));
      std::size_t n = 0, m = 0, r = 0, w = 0, f = 0;
      Check(fdmf_store_counts(store.get(), &n, &m, &r, nullptr));
      Check(fdmf_store_ingest_stats(store.get(), &w, &f));
      std::fprintf(stderr, "ingest: users=%zu products=%zu ratings=%zu skipped=%zu filtered=%zu\n",
                   n, m, r, w, f);
    } else if (*rel) {
      fdmf_store* raw = nullptr;
      Check(fdmf_store_load(store_path.c_str(), &raw));
      StorePtr store(raw);
      fdmf_store* scored = nullptr;
      Check(fdmf_reliability(store.get(), alpha, threshold, fallback_max ? 1 : 0,
                             out.c_str(), &scored));
      StorePtr scored_ptr(scored);
      if (!store_out.empty()) Check(fdmf_store_save(scored, store_out.c_str()));
    } else if (*synth) {
      ConfigPtr config = MakeConfig(g, o);
      fdmf_store* raw = nullptr;
      Check(fdmf_synth(users, products, rank, density, noise, g.seed.value_or(0), &raw));
      StorePtr store(raw);
      Check(fdmf_store_save(store.get(), out.empty() ? "synthetic.store" : out.c_str()));
      if (!reviews_out.empty()) {
        Check(fdmf_store_write_reviews(store.get(), reviews_out.c_str()));
      }
    } else if (*pmf || *pmlp) {
      ConfigPtr config = MakeConfig(g, o);
      StorePtr store = LoadStore(store_path, config.get());
      fdmf_model* raw = nullptr;
      Check(fdmf_pretrain(store.get(), config.get(),
                          *pmf ? FDMF_MODEL_MF : FDMF_MODEL_MLP, fold, &raw));
      ModelPtr model(raw);
      Check(fdmf_model_save(model.get(), out.c_str()));
    } else if (*train) {
      ConfigPtr config = MakeConfig(g, o);
      StorePtr store = LoadStore(store_path, config.get());
      ModelPtr mf, mlp;
      if (!mf_path.empty()) mf = LoadModel(mf_path);
      if (!mlp_path.empty()) mlp = LoadModel(mlp_path);
      fdmf_model* raw = nullptr;
      Check(fdmf_train(store.get(), config.get(), fold, mf.get(), mlp.get(), &raw));
      ModelPtr model(raw);
      Check(fdmf_model_save(model.get(), out.c_str()));
    } else if (*eval) {
      ConfigPtr config = MakeConfig(g, o);
      StorePtr store = LoadStore(store_path, config.get());
      ModelPtr model = LoadModel(model_path);
      OwnedText text;
      Check(fdmf_evaluate(model.get(), store.get(), config.get(), fold,
                          format == "kv" ? FDMF_FORMAT_KEY_VALUE : FDMF_FORMAT_TSV,
                          &text.text));
      WriteText(out, text.text);
    } else if (*predict) {
      ModelPtr model = LoadModel(model_path);
      std::ifstream file;
      std::istream* in = &std::cin;
      if (pairs_path != "-") {
        file.open(pairs_path);
        if (!file) throw Failure{FDMF_E_NOT_FOUND, "pairs file not found: " + pairs_path};
        in = &file;
      }
      std::ostringstream result;
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(*in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
          throw Failure{FDMF_E_PARSE, "pairs line " + std::to_string(line_no) +
                                          ": expected user<TAB>product"};
        }
        const std::string user = line.substr(0, tab);
        const std::string product = line.substr(tab + 1);
        double value = 0.0;
        Check(fdmf_predict(model.get(), user.c_str(), product.c_str(), &value));
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", value);
        result << user << '\t' << product << '\t' << buf << '\n';
      }
      WriteText(out, result.str().c_str());
    } else if (*sweep) {
      ConfigPtr config = MakeConfig(g, o);
      StorePtr store = LoadStore(store_path, config.get());
      OwnedText text;
      if (per_fold) {
        const std::string x = Text(fracs.back());
        const std::string rest = Text((1.0 - fracs.back()) / 2.0);
        Check(fdmf_config_set(config.get(), "train", x.c_str()));
        Check(fdmf_config_set(config.get(), "val", rest.c_str()));
        Check(fdmf_config_set(config.get(), "test", rest.c_str()));
        Check(fdmf_run_experiment(store.get(), config.get(),
                                  g.deterministic ? 0 : 1, &text.text));
      } else {
        Check(fdmf_sweep(store.get(), config.get(), fracs.data(), fracs.size(),
                         &text.text));
      }
      WriteText(out, text.text);
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error[%s]: %s\n", fdmf_status_name(f.status),
                 f.message.c_str());
    return 1;
  }
  return 0;
}
