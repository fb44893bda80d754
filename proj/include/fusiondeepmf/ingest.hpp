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

#ifndef FUSIONDEEPMF_INGEST_HPP_
#define FUSIONDEEPMF_INGEST_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fdmf {

using Index = std::uint32_t;
using PairKey = std::pair<Index, Index>;  // (user, product)

// Bijection between opaque string keys and dense indices, assigned in
// first-appearance order.
class KeyIndex {
 public:
  Index Intern(std::string_view key);
  std::optional<Index> Find(std::string_view key) const;
  const std::string& Key(Index index) const { return keys_.at(index); }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  friend bool operator==(const KeyIndex& a, const KeyIndex& b) {
    return a.keys_ == b.keys_;
  }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, Index> lookup_;
};

struct ReviewRecord {
  Index user = 0;
  Index product = 0;
  int rating = 0;             // 1..5
  std::int64_t helpful_yes = 0;
  std::int64_t votes_total = 0;
  std::int64_t unix_time = 0;
  std::uint64_t sequence = 0;  // position in the input stream

  friend bool operator==(const ReviewRecord&, const ReviewRecord&) = default;
};

struct ParseWarning {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ParseOptions {
  // Records with fewer total votes are dropped (not counted as warnings).
  std::int64_t min_votes = 0;
};

struct ParseResult {
  std::vector<ReviewRecord> records;
  KeyIndex users;
  KeyIndex products;
  std::vector<ParseWarning> warnings;
  std::size_t filtered = 0;
};

// Parses line-delimited JSON reviews (reviewerID, asin, overall, helpful,
// unixReviewTime). Malformed lines are skipped and reported with their line
// number; an unreadable stream throws IoError.
ParseResult ParseReviews(std::istream& in, const ParseOptions& options = {});
ParseResult ParseReviewsFile(const std::string& path,
                             const ParseOptions& options = {});

// raw / 5 for raw in [1, 5]; throws InvalidArgument otherwise.
double NormalizeRating(int raw);

struct RatingEntry {
  Index user = 0;
  Index product = 0;
  int raw = 0;
  double value = 0.0;  // raw / 5
};

struct ReliabilityEntry {
  Index user = 0;
  Index product = 0;
  double value = 0.0;
};

struct TimelineEntry {
  Index user = 0;
  std::int64_t unix_time = 0;
  std::int64_t helpful_yes = 0;
  std::int64_t votes_total = 0;
  std::uint64_t sequence = 0;
};

using ReliabilityMap = std::map<PairKey, double>;

// Immutable rating matrix R, reliability matrix H, their observation sets
// (omega, psi) and per-product review timelines.
class InteractionStore {
 public:
  InteractionStore() = default;

  std::size_t n_users() const { return users_.size(); }
  std::size_t n_products() const { return products_.size(); }
  const KeyIndex& users() const { return users_; }
  const KeyIndex& products() const { return products_; }

  // Deduplicated reviews, sorted by (user, product). One per omega entry.
  const std::vector<ReviewRecord>& reviews() const { return reviews_; }
  // omega, sorted by (user, product).
  const std::vector<RatingEntry>& ratings() const { return ratings_; }
  // psi, sorted by (user, product).
  const std::vector<ReliabilityEntry>& reliability() const {
    return reliability_;
  }
  // Per-product reviews ordered by (unix_time, input order).
  const std::vector<TimelineEntry>& timeline(Index product) const {
    return timelines_.at(product);
  }

  std::optional<double> Rating(Index user, Index product) const;
  std::optional<double> Reliability(Index user, Index product) const;

  // Observation counts used by the per-entity regularizers.
  const std::vector<std::size_t>& user_rating_counts() const {
    return user_rating_counts_;
  }
  const std::vector<std::size_t>& product_rating_counts() const {
    return product_rating_counts_;
  }
  const std::vector<std::size_t>& user_reliability_counts() const {
    return user_reliability_counts_;
  }
  const std::vector<std::size_t>& product_reliability_counts() const {
    return product_reliability_counts_;
  }

  double MeanRawRating() const;

  // Same key space, restricted to the given review positions. Reliability
  // entries are kept only for retained pairs.
  InteractionStore Subset(std::span<const std::size_t> review_positions) const;

  // Copy with psi replaced by `reliability`.
  InteractionStore WithReliability(const ReliabilityMap& reliability) const;

  friend InteractionStore BuildStore(std::vector<ReviewRecord> records,
                                     KeyIndex users, KeyIndex products,
                                     const ReliabilityMap& reliability);

 private:
  void Reindex();

  KeyIndex users_;
  KeyIndex products_;
  std::vector<ReviewRecord> reviews_;
  std::vector<RatingEntry> ratings_;
  std::vector<ReliabilityEntry> reliability_;
  std::vector<std::vector<TimelineEntry>> timelines_;
  std::vector<std::size_t> user_rating_counts_;
  std::vector<std::size_t> product_rating_counts_;
  std::vector<std::size_t> user_reliability_counts_;
  std::vector<std::size_t> product_reliability_counts_;
};

// Duplicate (user, product) reviews keep the latest unix_time (the later
// input record on a tie). Reliability keys must be a subset of the
// deduplicated record keys and values must lie in [0, 1].
InteractionStore BuildStore(std::vector<ReviewRecord> records, KeyIndex users,
                            KeyIndex products,
                            const ReliabilityMap& reliability = {});

inline InteractionStore BuildStore(ParseResult parsed,
                                   const ReliabilityMap& reliability = {}) {
  return BuildStore(std::move(parsed.records), std::move(parsed.users),
                    std::move(parsed.products), reliability);
}

// Text store file: version header, dimension counts, index maps, reviews and
// reliability entries. Round-trips exactly.
void SaveStore(const InteractionStore& store, std::ostream& out);
void SaveStoreFile(const InteractionStore& store, const std::string& path);
InteractionStore LoadStore(std::istream& in);
InteractionStore LoadStoreFile(const std::string& path);

}  // namespace fdmf

#endif  // FUSIONDEEPMF_INGEST_HPP_
