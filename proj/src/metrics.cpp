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

#include "fusiondeepmf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fusiondeepmf/errors.hpp"

namespace fdmf {
namespace {

void CheckPaired(std::span<const double> pred, std::span<const double> truth,
                 const char* what) {
  if (pred.size() != truth.size()) {
    throw InvalidArgument(std::string(what) + ": length mismatch (" +
                          std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()) + ")");
  }
  if (pred.empty()) throw InvalidArgument(std::string(what) + ": empty input");
}

double Gain(double rating) { return std::exp2(rating) - 1.0; }

// log2(1 + rank) with 1-based rank.
double Discount(std::size_t rank) {
  return std::log2(1.0 + static_cast<double>(rank));
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

double Rmse(std::span<const double> pred, std::span<const double> truth) {
  CheckPaired(pred, truth, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

double Mae(std::span<const double> pred, std::span<const double> truth) {
  CheckPaired(pred, truth, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += std::abs(pred[i] - truth[i]);
  }
  return sum / static_cast<double>(pred.size());
}

std::vector<UserPredictions> GroupByUser(std::span<const Index> users,
                                         std::span<const Index> products,
                                         std::span<const double> pred,
                                         std::span<const double> truth) {
  const std::size_t n = users.size();
  if (products.size() != n || pred.size() != n || truth.size() != n) {
    throw InvalidArgument("GroupByUser: array lengths differ");
  }
  std::map<Index, UserPredictions> groups;
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = groups[users[i]];
    g.user = users[i];
    g.products.push_back(products[i]);
    g.predicted.push_back(pred[i]);
    g.truth.push_back(truth[i]);
  }
  std::vector<UserPredictions> out;
  out.reserve(groups.size());
  for (auto& [u, g] : groups) out.push_back(std::move(g));
  return out;
}

std::vector<std::size_t> RankByPrediction(const UserPredictions& user) {
  std::vector<std::size_t> order(user.predicted.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (user.predicted[a] != user.predicted[b]) {
      return user.predicted[a] > user.predicted[b];
    }
    if (user.products[a] != user.products[b]) {
      return user.products[a] < user.products[b];
    }
    return a < b;
  });
  return order;
}

double F1Score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

PrecisionRecall PrecisionRecallOver(std::span<const UserPredictions> users,
                                    std::size_t limit, double threshold) {
  PrecisionRecall out;
  if (users.empty()) return out;
  double p_sum = 0.0;
  double r_sum = 0.0;
  for (const auto& u : users) {
    const auto order = RankByPrediction(u);
    const std::size_t top = std::min(limit, order.size());
    std::size_t pre = 0;
    std::size_t hit = 0;
    for (std::size_t k = 0; k < top; ++k) {
      const std::size_t j = order[k];
      if (u.predicted[j] >= threshold) {
        ++pre;
        if (u.truth[j] >= threshold) ++hit;
      }
    }
    std::size_t orig = 0;
    for (double t : u.truth) orig += t >= threshold ? 1 : 0;
    if (pre > 0) p_sum += static_cast<double>(hit) / static_cast<double>(pre);
    if (orig > 0) r_sum += static_cast<double>(hit) / static_cast<double>(orig);
  }
  const double count = static_cast<double>(users.size());
  out.precision = p_sum / count;
  out.recall = r_sum / count;
  out.f1 = F1Score(out.precision, out.recall);
  return out;
}

}  // namespace

PrecisionRecall ClassificationMetrics(std::span<const UserPredictions> users,
                                      double threshold) {
  return PrecisionRecallOver(users, static_cast<std::size_t>(-1), threshold);
}

PrecisionRecall TopTMetrics(std::span<const UserPredictions> users,
                            std::size_t t, double threshold) {
  if (t == 0) throw InvalidArgument("top-t cutoff must be >= 1");
  return PrecisionRecallOver(users, t, threshold);
}

double AveragePrecision(const UserPredictions& user, double threshold) {
  const auto order = RankByPrediction(user);
  std::size_t relevant = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (user.truth[order[k]] >= threshold) {
      ++relevant;
      sum += static_cast<double>(relevant) / static_cast<double>(k + 1);
    }
  }
  return relevant > 0 ? sum / static_cast<double>(relevant) : 0.0;
}

double Map(std::span<const UserPredictions> users, double threshold) {
  if (users.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& u : users) sum += AveragePrecision(u, threshold);
  return sum / static_cast<double>(users.size());
}

double UserNdcg(const UserPredictions& user, NdcgGain gain) {
  const std::size_t n = user.predicted.size();
  if (n <= 1) return 1.0;
  const auto& gains = gain == NdcgGain::kTrue ? user.truth : user.predicted;
  const auto order = RankByPrediction(user);
  double dcg = 0.0;
  for (std::size_t k = 0; k < n; ++k) dcg += Gain(gains[order[k]]) / Discount(k + 1);
  // Z_i: the same gains laid out in the order of the true ratings.
  std::vector<std::size_t> ideal(n);
  std::iota(ideal.begin(), ideal.end(), std::size_t{0});
  std::sort(ideal.begin(), ideal.end(), [&](std::size_t a, std::size_t b) {
    if (user.truth[a] != user.truth[b]) return user.truth[a] > user.truth[b];
    if (user.products[a] != user.products[b]) {
      return user.products[a] < user.products[b];
    }
    return a < b;
  });
  double z = 0.0;
  for (std::size_t k = 0; k < n; ++k) z += Gain(gains[ideal[k]]) / Discount(k + 1);
  return z > 0.0 ? dcg / z : 1.0;
}

double Ndcg(std::span<const UserPredictions> users, NdcgGain gain) {
  if (users.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& u : users) sum += UserNdcg(u, gain);
  return sum / static_cast<double>(users.size());
}

EvalReport Evaluate(std::span<const Index> users,
                    std::span<const Index> products,
                    std::span<const double> pred,
                    std::span<const double> truth,
                    const EvalOptions& options) {
  EvalReport report;
  report.rmse = Rmse(pred, truth);
  report.mae = Mae(pred, truth);
  const auto groups = GroupByUser(users, products, pred, truth);
  const auto pr = ClassificationMetrics(groups, options.threshold);
  report.precision = pr.precision;
  report.recall = pr.recall;
  report.f1 = pr.f1;
  report.map = Map(groups, options.threshold);
  report.ndcg = Ndcg(groups, options.gain);
  for (std::size_t t : options.cutoffs) {
    report.f1_at.emplace_back(t, TopTMetrics(groups, t, options.threshold).f1);
  }
  report.n_users = groups.size();
  report.n_pairs = pred.size();
  return report;
}

EvalReport MeanReport(std::span<const EvalReport> reports) {
  if (reports.empty()) throw InvalidArgument("MeanReport: no reports");
  EvalReport mean;
  mean.f1_at = reports.front().f1_at;
  for (auto& [t, v] : mean.f1_at) v = 0.0;
  double users = 0.0;
  double pairs = 0.0;
  for (const auto& r : reports) {
    if (r.f1_at.size() != mean.f1_at.size()) {
      throw InvalidArgument("MeanReport: reports use different cutoffs");
    }
    mean.rmse += r.rmse;
    mean.mae += r.mae;
    mean.precision += r.precision;
    mean.recall += r.recall;
    mean.f1 += r.f1;
    mean.map += r.map;
    mean.ndcg += r.ndcg;
    for (std::size_t i = 0; i < r.f1_at.size(); ++i) {
      mean.f1_at[i].second += r.f1_at[i].second;
    }
    users += static_cast<double>(r.n_users);
    pairs += static_cast<double>(r.n_pairs);
  }
  const double n = static_cast<double>(reports.size());
  mean.rmse /= n;
  mean.mae /= n;
  mean.precision /= n;
  mean.recall /= n;
  mean.f1 /= n;
  mean.map /= n;
  mean.ndcg /= n;
  for (auto& [t, v] : mean.f1_at) v /= n;
  mean.n_users = static_cast<std::size_t>(std::llround(users / n));
  mean.n_pairs = static_cast<std::size_t>(std::llround(pairs / n));
  return mean;
}

std::string ReportTsvHeader(const EvalReport& report) {
  std::string out = "label\trmse\tmae\tprecision\trecall\tf1\tmap\tndcg";
  for (const auto& [t, v] : report.f1_at) out += "\tf1@" + std::to_string(t);
  out += "\tn_users\tn_pairs";
  return out;
}

std::string ReportTsvRow(const EvalReport& report, const std::string& label) {
  std::ostringstream out;
  out << label;
  for (double v : {report.rmse, report.mae, report.precision, report.recall,
                   report.f1, report.map, report.ndcg}) {
    out << '\t' << FormatDouble(v);
  }
  for (const auto& [t, v] : report.f1_at) out << '\t' << FormatDouble(v);
  out << '\t' << report.n_users << '\t' << report.n_pairs;
  return out.str();
}

void WriteReportKeyValue(const EvalReport& report, std::ostream& out,
                         const std::string& prefix) {
  out << prefix << "rmse=" << FormatDouble(report.rmse) << '\n'
      << prefix << "mae=" << FormatDouble(report.mae) << '\n'
      << prefix << "precision=" << FormatDouble(report.precision) << '\n'
      << prefix << "recall=" << FormatDouble(report.recall) << '\n'
      << prefix << "f1=" << FormatDouble(report.f1) << '\n'
      << prefix << "map=" << FormatDouble(report.map) << '\n'
      << prefix << "ndcg=" << FormatDouble(report.ndcg) << '\n';
  for (const auto& [t, v] : report.f1_at) {
    out << prefix << "f1@" << t << '=' << FormatDouble(v) << '\n';
  }
  out << prefix << "n_users=" << report.n_users << '\n'
      << prefix << "n_pairs=" << report.n_pairs << '\n';
}

}  // namespace fdmf
