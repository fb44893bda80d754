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

#include "fusiondeepmf/reliability.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>

#include "fusiondeepmf/errors.hpp"

namespace fdmf {

namespace {

std::vector<double> Normalized(std::vector<double> raw) {
  double total = 0.0;
  for (double x : raw) total += x;
  if (total <= 0.0) {
    std::fill(raw.begin(), raw.end(), 0.0);
    return raw;
  }
  for (double& x : raw) x /= total;
  return raw;
}

}  // namespace

const char* LabelName(ReviewerLabel label) {
  return label == ReviewerLabel::kReliable ? "reliable" : "not-reliable";
}

std::vector<double> HelpfulnessScores(std::span<const TimelineEntry> timeline,
                                      HelpfulDenominator denominator) {
  std::int64_t max_yes = 0;
  for (const auto& e : timeline) max_yes = std::max(max_yes, e.helpful_yes);
  std::vector<double> l(timeline.size(), 0.0);
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const double yes = static_cast<double>(timeline[i].helpful_yes);
    const std::int64_t denom = denominator == HelpfulDenominator::kTotalVotes
                                   ? timeline[i].votes_total
                                   : max_yes;
    l[i] = denom > 0 ? yes * yes / static_cast<double>(denom) : 0.0;
  }
  return Normalized(std::move(l));
}

double RecencyWeight(std::size_t position, std::size_t n_reviewers) {
  double c = 0.0;
  for (std::size_t s = 1; s + position <= n_reviewers; ++s) {
    c += 1.0 / (static_cast<double>(s) * static_cast<double>(s));
  }
  return c;
}

std::vector<double> MostRecentScores(std::span<const TimelineEntry> timeline) {
  const std::size_t n = timeline.size();
  std::vector<double> c(n, 0.0);
  // c_i = c_{i+1} + 1/(n-i)^2 accumulates the terms in ascending s.
  for (std::size_t pos = n; pos-- > 1;) {
    const double s = static_cast<double>(n - pos);
    c[pos - 1] = c[pos] + 1.0 / (s * s);
  }
  return Normalized(std::move(c));
}

std::vector<std::size_t> HelpfulnessRanks(
    std::span<const TimelineEntry> timeline, std::span<const double> h) {
  std::vector<std::size_t> order(timeline.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (h[a] != h[b]) return h[a] > h[b];
    if (timeline[a].unix_time != timeline[b].unix_time)
      return timeline[a].unix_time < timeline[b].unix_time;
    if (timeline[a].user != timeline[b].user)
      return timeline[a].user < timeline[b].user;
    return a < b;
  });
  std::vector<std::size_t> ranks(timeline.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = r + 1;
  return ranks;
}

std::vector<double> TopRankingScores(std::span<const std::size_t> ranks) {
  const std::size_t n = ranks.size();
  std::vector<double> q(n, 0.0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const double o = static_cast<double>(ranks[pos]);
    const double later = static_cast<double>(n - (pos + 1));
    q[pos] = (1.0 / (o * o)) * later;
  }
  return Normalized(std::move(q));
}

double CombinedScore(double top, double most, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("alpha " + std::to_string(alpha) +
                          " outside [0, 1]");
  }
  return alpha * top + (1.0 - alpha) * most;
}

std::vector<ReliabilityBreakdown> ScoreProduct(
    Index product, std::span<const TimelineEntry> timeline,
    const ReliabilityOptions& options) {
  const auto h = HelpfulnessScores(timeline, options.denominator);
  const auto most = MostRecentScores(timeline);
  const auto ranks = HelpfulnessRanks(timeline, h);
  const auto top = TopRankingScores(ranks);
  std::vector<ReliabilityBreakdown> rows(timeline.size());
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    auto& r = rows[i];
    r.user = timeline[i].user;
    r.product = product;
    r.h = h[i];
    r.most = most[i];
    r.top = top[i];
    r.alpha = options.alpha;
    r.d = CombinedScore(r.top, r.most, options.alpha);
    r.rel = ReliabilityScore(r.h, r.d);
    r.label = ClassifyReviewer(r.rel, options.threshold);
  }
  return rows;
}

std::vector<ReliabilityBreakdown> ScoreStore(const InteractionStore& store,
                                             const ReliabilityOptions& options) {
  if (!(options.alpha >= 0.0 && options.alpha <= 1.0)) {
    throw InvalidArgument("alpha outside [0, 1]");
  }
  std::vector<ReliabilityBreakdown> rows;
  rows.reserve(store.reviews().size());
  for (Index p = 0; p < store.n_products(); ++p) {
    auto product_rows = ScoreProduct(p, store.timeline(p), options);
    rows.insert(rows.end(), product_rows.begin(), product_rows.end());
  }
  std::sort(rows.begin(), rows.end(),
            [](const ReliabilityBreakdown& a, const ReliabilityBreakdown& b) {
              return PairKey{a.user, a.product} < PairKey{b.user, b.product};
            });
  return rows;
}

ReliabilityMap ToReliabilityMap(std::span<const ReliabilityBreakdown> rows) {
  ReliabilityMap out;
  for (const auto& r : rows) out[{r.user, r.product}] = r.rel;
  return out;
}

void WriteBreakdown(std::span<const ReliabilityBreakdown> rows,
                    const InteractionStore& store, std::ostream& out) {
  out << "user\tproduct\th\tmost\ttop\td\trel\tlabel\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << store.users().Key(r.user) << '\t' << store.products().Key(r.product)
        << '\t' << r.h << '\t' << r.most << '\t' << r.top << '\t' << r.d
        << '\t' << r.rel << '\t' << LabelName(r.label) << '\n';
  }
}

}  // namespace fdmf
