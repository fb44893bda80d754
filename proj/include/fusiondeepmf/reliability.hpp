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

#ifndef FUSIONDEEPMF_RELIABILITY_HPP_
#define FUSIONDEEPMF_RELIABILITY_HPP_

#include <iosfwd>
#include <span>
#include <vector>

#include "fusiondeepmf/ingest.hpp"

namespace fdmf {

// Denominator of the squared-helpful-vote ratio l = yes^2 / denom.
enum class HelpfulDenominator {
  kTotalVotes,  // votes on the review itself
  kMaxHelpful,  // largest helpful count on the product (vote-less datasets)
};

struct ReliabilityOptions {
  double alpha = 0.5;
  double threshold = 0.5;
  HelpfulDenominator denominator = HelpfulDenominator::kTotalVotes;
};

enum class ReviewerLabel { kReliable, kNotReliable };

const char* LabelName(ReviewerLabel label);

struct ReliabilityBreakdown {
  Index user = 0;
  Index product = 0;
  double h = 0.0;
  double most = 0.0;
  double top = 0.0;
  double d = 0.0;
  double rel = 0.0;
  double alpha = 0.5;
  ReviewerLabel label = ReviewerLabel::kNotReliable;
};

// All per-review functions below take a product timeline in ascending time
// order (position 0 = first reviewer) and return one score per position.
// Degenerate normalizations (all-zero sums, a single reviewer) yield 0.

std::vector<double> HelpfulnessScores(
    std::span<const TimelineEntry> timeline,
    HelpfulDenominator denominator = HelpfulDenominator::kTotalVotes);

std::vector<double> MostRecentScores(std::span<const TimelineEntry> timeline);

// Unnormalized recency weight of the reviewer at 1-based `position` among
// `n_reviewers`: sum_{s=1}^{n-position} 1/s^2.
double RecencyWeight(std::size_t position, std::size_t n_reviewers);

// Helpfulness ranks (1 = most helpful) per timeline position. Ties go to the
// earlier review, then to the lower user index.
std::vector<std::size_t> HelpfulnessRanks(
    std::span<const TimelineEntry> timeline, std::span<const double> h);

std::vector<double> TopRankingScores(std::span<const std::size_t> ranks);

// alpha * top + (1 - alpha) * most. Throws InvalidArgument if alpha is
// outside [0, 1].
double CombinedScore(double top, double most, double alpha);

inline double ReliabilityScore(double h, double d) { return (h + d) / 2.0; }

inline ReviewerLabel ClassifyReviewer(double rel, double threshold = 0.5) {
  return rel >= threshold ? ReviewerLabel::kReliable
                          : ReviewerLabel::kNotReliable;
}

std::vector<ReliabilityBreakdown> ScoreProduct(
    Index product, std::span<const TimelineEntry> timeline,
    const ReliabilityOptions& options = {});

// Every review in the store, sorted by (user, product).
std::vector<ReliabilityBreakdown> ScoreStore(
    const InteractionStore& store, const ReliabilityOptions& options = {});

ReliabilityMap ToReliabilityMap(std::span<const ReliabilityBreakdown> rows);

// Tab-separated rows: user product h most top d rel label.
void WriteBreakdown(std::span<const ReliabilityBreakdown> rows,
                    const InteractionStore& store, std::ostream& out);

}  // namespace fdmf

#endif  // FUSIONDEEPMF_RELIABILITY_HPP_
