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

#include "fusiondeepmf/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "fusiondeepmf/errors.hpp"
#include "json.hpp"

namespace fdmf {

namespace {

using nlohmann::json;

constexpr const char* kStoreMagic = "fdmf-store";
constexpr int kStoreVersion = 1;

bool AsInteger(const json& v, std::int64_t& out) {
  if (v.is_number_integer()) {
    out = v.get<std::int64_t>();
    return true;
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && std::floor(d) == d &&
        std::abs(d) < 9.0e15) {
      out = static_cast<std::int64_t>(d);
      return true;
    }
  }
  return false;
}

// Returns an empty string on success, otherwise the reason for skipping.
std::string DecodeRecord(const json& obj, std::string& user_key,
                         std::string& product_key, ReviewRecord& rec) {
  if (!obj.is_object()) return "line is not a JSON object";
  auto user = obj.find("reviewerID");
  if (user == obj.end() || !user->is_string()) return "missing reviewerID";
  auto product = obj.find("asin");
  if (product == obj.end() || !product->is_string()) return "missing asin";
  user_key = user->get<std::string>();
  product_key = product->get<std::string>();
  if (user_key.empty() || product_key.empty()) return "empty identifier";
  if (user_key.find_first_of("\r\n") != std::string::npos ||
      product_key.find_first_of("\r\n") != std::string::npos) {
    return "identifier contains a line break";
  }

  auto overall = obj.find("overall");
  std::int64_t rating = 0;
  if (overall == obj.end()) return "missing overall";
  if (!AsInteger(*overall, rating)) return "overall is not an integer rating";
  if (rating < 1 || rating > 5) return "overall outside [1, 5]";
  rec.rating = static_cast<int>(rating);

  auto helpful = obj.find("helpful");
  rec.helpful_yes = 0;
  rec.votes_total = 0;
  if (helpful != obj.end() && !helpful->is_null()) {
    if (!helpful->is_array() || helpful->size() != 2) {
      return "helpful is not a pair";
    }
    if (!AsInteger((*helpful)[0], rec.helpful_yes) ||
        !AsInteger((*helpful)[1], rec.votes_total)) {
      return "helpful entries are not integers";
    }
    if (rec.helpful_yes < 0 || rec.votes_total < 0) {
      return "negative helpful votes";
    }
    if (rec.helpful_yes > rec.votes_total) return "helpful_yes > votes_total";
  }

  auto when = obj.find("unixReviewTime");
  if (when == obj.end()) return "missing unixReviewTime";
  if (!AsInteger(*when, rec.unix_time)) {
    return "unixReviewTime is not an integer";
  }
  return {};
}

bool SamePair(const ReviewRecord& a, const ReviewRecord& b) {
  return a.user == b.user && a.product == b.product;
}

}  // namespace

Index KeyIndex::Intern(std::string_view key) {
  std::string k(key);
  auto it = lookup_.find(k);
  if (it != lookup_.end()) return it->second;
  const auto idx = static_cast<Index>(keys_.size());
  keys_.push_back(k);
  lookup_.emplace(std::move(k), idx);
  return idx;
}

std::optional<Index> KeyIndex::Find(std::string_view key) const {
  auto it = lookup_.find(std::string(key));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

ParseResult ParseReviews(std::istream& in, const ParseOptions& options) {
  if (!in.good()) throw IoError("review stream is not readable");
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t sequence = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) {
      result.warnings.push_back({line_no, "malformed JSON"});
      continue;
    }
    std::string user_key;
    std::string product_key;
    ReviewRecord rec;
    if (std::string why = DecodeRecord(obj, user_key, product_key, rec);
        !why.empty()) {
      result.warnings.push_back({line_no, std::move(why)});
      continue;
    }
    if (rec.votes_total < options.min_votes) {
      ++result.filtered;
      continue;
    }
    rec.user = result.users.Intern(user_key);
    rec.product = result.products.Intern(product_key);
    rec.sequence = sequence++;
    result.records.push_back(rec);
  }
  if (in.bad()) throw IoError("read failure at line " + std::to_string(line_no));
  return result;
}

ParseResult ParseReviewsFile(const std::string& path,
                             const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open review file '" + path + "'");
  return ParseReviews(in, options);
}

double NormalizeRating(int raw) {
  if (raw < 1 || raw > 5) {
    throw InvalidArgument("rating " + std::to_string(raw) +
                          " outside [1, 5]");
  }
  return static_cast<double>(raw) / 5.0;
}

InteractionStore BuildStore(std::vector<ReviewRecord> records, KeyIndex users,
                            KeyIndex products,
                            const ReliabilityMap& reliability) {
  for (const auto& r : records) {
    if (r.user >= users.size() || r.product >= products.size()) {
      throw InvalidArgument("record index outside key maps");
    }
    NormalizeRating(r.rating);
    if (r.helpful_yes < 0 || r.votes_total < 0 ||
        r.helpful_yes > r.votes_total) {
      throw InvalidArgument("record violates 0 <= helpful_yes <= votes_total");
    }
  }
  // Latest unix_time wins; equal times fall back to input order.
  std::stable_sort(records.begin(), records.end(),
                   [](const ReviewRecord& a, const ReviewRecord& b) {
                     if (a.user != b.user) return a.user < b.user;
                     if (a.product != b.product) return a.product < b.product;
                     if (a.unix_time != b.unix_time)
                       return a.unix_time < b.unix_time;
                     return a.sequence < b.sequence;
                   });
  std::vector<ReviewRecord> dedup;
  dedup.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i + 1 < records.size() && SamePair(records[i], records[i + 1])) {
      continue;
    }
    dedup.push_back(records[i]);
  }

  InteractionStore store;
  store.users_ = std::move(users);
  store.products_ = std::move(products);
  store.reviews_ = std::move(dedup);
  for (const auto& [key, value] : reliability) {
    auto it = std::lower_bound(
        store.reviews_.begin(), store.reviews_.end(), key,
        [](const ReviewRecord& r, const PairKey& k) {
          return PairKey{r.user, r.product} < k;
        });
    if (it == store.reviews_.end() || PairKey{it->user, it->product} != key) {
      throw InvalidArgument("reliability entry (" + std::to_string(key.first) +
                            ", " + std::to_string(key.second) +
                            ") has no matching review");
    }
    if (!(value >= 0.0 && value <= 1.0)) {
      throw InvalidArgument("reliability value outside [0, 1]");
    }
    store.reliability_.push_back({key.first, key.second, value});
  }
  store.Reindex();
  return store;
}

void InteractionStore::Reindex() {
  ratings_.clear();
  ratings_.reserve(reviews_.size());
  timelines_.assign(products_.size(), {});
  user_rating_counts_.assign(users_.size(), 0);
  product_rating_counts_.assign(products_.size(), 0);
  user_reliability_counts_.assign(users_.size(), 0);
  product_reliability_counts_.assign(products_.size(), 0);
  for (const auto& r : reviews_) {
    ratings_.push_back({r.user, r.product, r.rating, NormalizeRating(r.rating)});
    timelines_[r.product].push_back(
        {r.user, r.unix_time, r.helpful_yes, r.votes_total, r.sequence});
    ++user_rating_counts_[r.user];
    ++product_rating_counts_[r.product];
  }
  for (auto& tl : timelines_) {
    std::sort(tl.begin(), tl.end(),
              [](const TimelineEntry& a, const TimelineEntry& b) {
                if (a.unix_time != b.unix_time)
                  return a.unix_time < b.unix_time;
                return a.sequence < b.sequence;
              });
  }
  for (const auto& e : reliability_) {
    ++user_reliability_counts_[e.user];
    ++product_reliability_counts_[e.product];
  }
}

std::optional<double> InteractionStore::Rating(Index user,
                                               Index product) const {
  auto it = std::lower_bound(ratings_.begin(), ratings_.end(),
                             PairKey{user, product},
                             [](const RatingEntry& e, const PairKey& k) {
                               return PairKey{e.user, e.product} < k;
                             });
  if (it == ratings_.end() || it->user != user || it->product != product) {
    return std::nullopt;
  }
  return it->value;
}

std::optional<double> InteractionStore::Reliability(Index user,
                                                    Index product) const {
  auto it = std::lower_bound(reliability_.begin(), reliability_.end(),
                             PairKey{user, product},
                             [](const ReliabilityEntry& e, const PairKey& k) {
                               return PairKey{e.user, e.product} < k;
                             });
  if (it == reliability_.end() || it->user != user || it->product != product) {
    return std::nullopt;
  }
  return it->value;
}

double InteractionStore::MeanRawRating() const {
  if (ratings_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : ratings_) sum += r.raw;
  return sum / static_cast<double>(ratings_.size());
}

InteractionStore InteractionStore::Subset(
    std::span<const std::size_t> review_positions) const {
  std::vector<std::size_t> positions(review_positions.begin(),
                                     review_positions.end());
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()),
                  positions.end());
  InteractionStore out;
  out.users_ = users_;
  out.products_ = products_;
  out.reviews_.reserve(positions.size());
  for (std::size_t p : positions) out.reviews_.push_back(reviews_.at(p));
  std::size_t cursor = 0;
  for (const auto& e : reliability_) {
    const PairKey key{e.user, e.product};
    while (cursor < out.reviews_.size() &&
           PairKey{out.reviews_[cursor].user, out.reviews_[cursor].product} <
               key) {
      ++cursor;
    }
    if (cursor < out.reviews_.size() &&
        PairKey{out.reviews_[cursor].user, out.reviews_[cursor].product} ==
            key) {
      out.reliability_.push_back(e);
    }
  }
  out.Reindex();
  return out;
}

InteractionStore InteractionStore::WithReliability(
    const ReliabilityMap& reliability) const {
  return BuildStore(reviews_, users_, products_, reliability);
}

void SaveStore(const InteractionStore& store, std::ostream& out) {
  out << kStoreMagic << ' ' << kStoreVersion << '\n';
  out << "users " << store.n_users() << '\n';
  for (const auto& k : store.users().keys()) out << k << '\n';
  out << "products " << store.n_products() << '\n';
  for (const auto& k : store.products().keys()) out << k << '\n';
  out << "reviews " << store.reviews().size() << '\n';
  for (const auto& r : store.reviews()) {
    out << r.user << ' ' << r.product << ' ' << r.rating << ' '
        << r.helpful_yes << ' ' << r.votes_total << ' ' << r.unix_time << ' '
        << r.sequence << '\n';
  }
  out << "reliability " << store.reliability().size() << '\n';
  out << std::setprecision(17);
  for (const auto& e : store.reliability()) {
    out << e.user << ' ' << e.product << ' ' << e.value << '\n';
  }
  out << "end\n";
}

void SaveStoreFile(const InteractionStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write store '" + path + "'");
  SaveStore(store, out);
  if (!out) throw IoError("write failure on store '" + path + "'");
}

namespace {

std::size_t ReadSection(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("store truncated before section '" + name + "'");
  }
  std::istringstream ss(line);
  std::string tag;
  std::size_t count = 0;
  if (!(ss >> tag >> count) || tag != name) {
    throw ParseError("expected section '" + name + "', got '" + line + "'");
  }
  return count;
}

KeyIndex ReadKeys(std::istream& in, std::size_t count) {
  KeyIndex keys;
  std::string line;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError("store truncated in key map");
    if (keys.Intern(line) != i) throw ParseError("duplicate key '" + line + "'");
  }
  return keys;
}

}  // namespace

InteractionStore LoadStore(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty store file");
  {
    std::istringstream ss(line);
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != kStoreMagic) {
      throw ParseError("not a store file (bad header)");
    }
    if (version != kStoreVersion) {
      throw ParseError("unsupported store version " + std::to_string(version));
    }
  }
  KeyIndex users = ReadKeys(in, ReadSection(in, "users"));
  KeyIndex products = ReadKeys(in, ReadSection(in, "products"));
  const std::size_t n_reviews = ReadSection(in, "reviews");
  std::vector<ReviewRecord> records(n_reviews);
  for (auto& r : records) {
    if (!std::getline(in, line)) throw ParseError("store truncated in reviews");
    std::istringstream ss(line);
    if (!(ss >> r.user >> r.product >> r.rating >> r.helpful_yes >>
          r.votes_total >> r.unix_time >> r.sequence)) {
      throw ParseError("bad review row '" + line + "'");
    }
  }
  const std::size_t n_rel = ReadSection(in, "reliability");
  ReliabilityMap rel;
  for (std::size_t i = 0; i < n_rel; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError("store truncated in reliability");
    }
    std::istringstream ss(line);
    Index u = 0;
    Index p = 0;
    double v = 0.0;
    if (!(ss >> u >> p >> v)) throw ParseError("bad reliability row '" + line + "'");
    rel[{u, p}] = v;
  }
  if (!std::getline(in, line) || line != "end") {
    throw ParseError("store missing end marker");
  }
  try {
    return BuildStore(std::move(records), std::move(users), std::move(products),
                      rel);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("inconsistent store: ") + e.what());
  }
}

InteractionStore LoadStoreFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("store not found: '" + path + "'");
  return LoadStore(in);
}

}  // namespace fdmf
