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

#ifndef FUSIONDEEPMF_METRICS_HPP_
#define FUSIONDEEPMF_METRICS_HPP_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusiondeepmf/ingest.hpp"

namespace fdmf {

// Raw-scale error metrics. Empty or mismatched inputs throw InvalidArgument.
double Rmse(std::span<const double> pred, std::span<const double> truth);
double Mae(std::span<const double> pred, std::span<const double> truth);

// One user's test items omega(i) with predicted and true raw ratings.
struct UserPredictions {
  Index user = 0;
  std::vector<Index> products;
  std::vector<double> predicted;
  std::vector<double> truth;
};

// Groups parallel (user, product, pred, truth) arrays by user, users
// ascending, items in input order.
std::vector<UserPredictions> GroupByUser(std::span<const Index> users,
                                         std::span<const Index> products,
                                         std::span<const double> pred,
                                         std::span<const double> truth);

// Positions of the user's items by predicted rating descending, ties by
// ascending product index.
std::vector<std::size_t> RankByPrediction(const UserPredictions& user);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 2PR / (P + R), or 0 when both are 0.
double F1Score(double precision, double recall);

// Pre(i) = predicted >= threshold, Orig(i) = true >= threshold. A user with
// an empty Pre(i) (Orig(i)) contributes 0 to the precision (recall) mean.
PrecisionRecall ClassificationMetrics(std::span<const UserPredictions> users,
                                      double threshold = 3.0);

// Same as ClassificationMetrics with Pre(i) limited to the top t of the
// ranked list.
PrecisionRecall TopTMetrics(std::span<const UserPredictions> users,
                            std::size_t t, double threshold = 3.0);

double AveragePrecision(const UserPredictions& user, double threshold = 3.0);
double Map(std::span<const UserPredictions> users, double threshold = 3.0);

enum class NdcgGain {
  kTrue,       // gains 2^r - 1 from the true ratings, in predicted order
  kPredicted,  // gains 2^rhat - 1 from the predictions
};

double UserNdcg(const UserPredictions& user, NdcgGain gain = NdcgGain::kTrue);
double Ndcg(std::span<const UserPredictions> users,
            NdcgGain gain = NdcgGain::kTrue);

struct EvalOptions {
  double threshold = 3.0;
  std::vector<std::size_t> cutoffs = {5, 10};
  NdcgGain gain = NdcgGain::kTrue;
};

struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double map = 0.0;
  double ndcg = 0.0;
  std::vector<std::pair<std::size_t, double>> f1_at;  // (t, F1@t)
  std::size_t n_users = 0;
  std::size_t n_pairs = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalReport Evaluate(std::span<const Index> users,
                    std::span<const Index> products,
                    std::span<const double> pred,
                    std::span<const double> truth,
                    const EvalOptions& options = {});

// Field-wise arithmetic mean; counts are averaged and rounded.
EvalReport MeanReport(std::span<const EvalReport> reports);

// Tab-separated header line and row. `label` fills the first column.
std::string ReportTsvHeader(const EvalReport& report);
std::string ReportTsvRow(const EvalReport& report, const std::string& label);
// One key=value pair per line.
void WriteReportKeyValue(const EvalReport& report, std::ostream& out,
                         const std::string& prefix = "");

}  // namespace fdmf

#endif  // FUSIONDEEPMF_METRICS_HPP_
