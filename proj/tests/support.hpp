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

// Shared fixtures and independent oracles for the unit and acceptance tests.
#ifndef FUSIONDEEPMF_TESTS_SUPPORT_HPP_
#define FUSIONDEEPMF_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "fusiondeepmf/ingest.hpp"
#include "fusiondeepmf/linalg.hpp"
#include "fusiondeepmf/metrics.hpp"
#include "fusiondeepmf/params.hpp"
#include "fusiondeepmf/rng.hpp"

namespace fdmf::testing {

struct Cell {
  Index user;
  Index product;
  int rating;
};

// Store over n users and m products with keys u<i>/p<j>; reliability is
// attached for the listed cells.
inline InteractionStore MakeStore(std::size_t n, std::size_t m,
                                  const std::vector<Cell>& cells,
                                  const ReliabilityMap& rel = {}) {
  KeyIndex users;
  KeyIndex products;
  for (std::size_t i = 0; i < n; ++i) users.Intern("u" + std::to_string(i));
  for (std::size_t j = 0; j < m; ++j) products.Intern("p" + std::to_string(j));
  std::vector<ReviewRecord> records;
  for (const auto& c : cells) {
    ReviewRecord r;
    r.user = c.user;
    r.product = c.product;
    r.rating = c.rating;
    r.unix_time = static_cast<std::int64_t>(records.size());
    r.sequence = records.size();
    records.push_back(r);
  }
  return BuildStore(std::move(records), std::move(users), std::move(products),
                    rel);
}

// Random tiny store: each cell observed with probability `density` (at
// least one cell per user), reliability on roughly half the observed cells.
inline InteractionStore RandomStore(std::size_t n, std::size_t m,
                                    double density, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> rating(1, 5);
  std::vector<Cell> cells;
  ReliabilityMap rel;
  for (Index i = 0; i < n; ++i) {
    bool any = false;
    for (Index j = 0; j < m; ++j) {
      const bool keep = unit(rng) < density || (!any && j + 1 == m);
      if (!keep) continue;
      any = true;
      cells.push_back({i, j, rating(rng)});
      if (unit(rng) < 0.5) rel[{i, j}] = 0.05 + 0.9 * unit(rng);
    }
  }
  return MakeStore(n, m, cells, rel);
}

// Relative error between an analytic gradient and central differences of
// `loss` around the current block values.
inline double GradCheck(const BlockList& params, const BlockList& grads,
                        const std::function<double()>& loss,
                        double step = 1e-6) {
  std::vector<double> x = Flatten(params);
  const std::vector<double> analytic = Flatten(grads);
  const auto f = [&](std::span<const double> v) {
    Assign(params, v);
    return loss();
  };
  const std::vector<double> numeric = FiniteDiffGrad(f, x, step);
  Assign(params, x);
  return MaxRelativeError(analytic, numeric);
}

// ---- ranking oracles ----

inline std::vector<std::vector<std::size_t>> AllPermutations(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline double DcgOf(const std::vector<double>& gains_in_order) {
  double dcg = 0.0;
  for (std::size_t k = 0; k < gains_in_order.size(); ++k) {
    dcg += (std::pow(2.0, gains_in_order[k]) - 1.0) /
           (std::log(2.0 + static_cast<double>(k)) / std::log(2.0));
  }
  return dcg;
}

// The unique permutation consistent with "prediction descending, ties by
// ascending product", found by exhaustive search.
inline std::vector<std::size_t> BruteRanking(const UserPredictions& u) {
  for (const auto& perm : AllPermutations(u.predicted.size())) {
    bool ok = true;
    for (std::size_t k = 0; k + 1 < perm.size() && ok; ++k) {
      const double a = u.predicted[perm[k]];
      const double b = u.predicted[perm[k + 1]];
      ok = a > b || (a == b && u.products[perm[k]] < u.products[perm[k + 1]]);
    }
    if (ok) return perm;
  }
  return {};
}

// DCG in predicted order over the best DCG of any permutation.
inline double BruteNdcg(const UserPredictions& u) {
  if (u.predicted.size() <= 1) return 1.0;
  std::vector<double> ranked;
  for (std::size_t j : BruteRanking(u)) ranked.push_back(u.truth[j]);
  double best = 0.0;
  for (const auto& perm : AllPermutations(u.truth.size())) {
    std::vector<double> g;
    for (std::size_t j : perm) g.push_back(u.truth[j]);
    best = std::max(best, DcgOf(g));
  }
  return DcgOf(ranked) / best;
}

// Average precision from set counts at each relevant cut.
inline double BruteAveragePrecision(const UserPredictions& u,
                                    double threshold = 3.0) {
  const auto order = BruteRanking(u);
  std::size_t orig = 0;
  for (double t : u.truth) orig += t >= threshold ? 1 : 0;
  if (orig == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 1; t <= order.size(); ++t) {
    if (u.truth[order[t - 1]] < threshold) continue;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < t; ++k) hits += u.truth[order[k]] >= threshold;
    sum += static_cast<double>(hits) / static_cast<double>(t);
  }
  return sum / static_cast<double>(orig);
}

}  // namespace fdmf::testing

#endif  // FUSIONDEEPMF_TESTS_SUPPORT_HPP_
