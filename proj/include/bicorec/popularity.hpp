// Copyright 2026 The BiCoRec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BICOREC_POPULARITY_HPP_
#define BICOREC_POPULARITY_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "bicorec/corpus.hpp"

namespace bicorec {

/// TF-IDF tables built once over a set of sequences (normally the training
/// view, so held-out targets never leak into the scores). Can score any
/// sequence afterwards; items a user never consumed score 0.
class PopularityModel {
 public:
  PopularityModel(const std::vector<UserSequence>& sequences, int item_count);

  int sequence_count() const { return sequence_count_; }

  /// Natural-log inverse document frequency. Throws for items that appear in
  /// no sequence (undefined idf).
  double idf(int item) const;

  /// TF-IDF of `item` within the stored sequence of user row `user`.
  double score(int user, int item) const;

  /// Position-aligned scores for an arbitrary sequence of user row `user`;
  /// padding positions score 0.
  Eigen::VectorXd sequence_scores(int user, const UserSequence& seq) const;

 private:
  int sequence_count_ = 0;
  std::vector<std::unordered_map<int, int>> user_counts_;
  std::vector<int> user_real_len_;
  std::vector<int> containing_;  // number of sequences holding each item
};

/// Matrix of per-user, per-position TF-IDF popularity scores. Row u is
/// aligned with sequences[u]; padding positions are 0.
struct PopularityScores {
  Eigen::MatrixXd q;  // user_count x max_len
};

struct ItemPartition {
  std::set<int> popular;
  std::set<int> niche;
  std::vector<std::int64_t> frequency;  // indexed by item, slot 0 unused

  bool is_popular(int item) const { return popular.count(item) > 0; }
};

struct RatioCurve {
  std::vector<std::int64_t> popular_count;  // per position, 1-based stored 0-based
  std::vector<std::int64_t> niche_count;
  std::vector<double> ratio;  // +inf when only popular, NaN when neither
};

/// Term frequency of `item` within one sequence: occurrences among real
/// positions over the count of real positions.
double tf(int item, const UserSequence& sequence);

/// log(S / s_v) over a sequence collection; natural logarithm.
double idf(int item, const std::vector<UserSequence>& sequences);

PopularityScores compute_popularity_scores(
    const std::vector<UserSequence>& sequences, int item_count);

/// Sorts items by descending interaction frequency (ties by ascending item
/// index) and marks the top ceil(head_fraction * item_count) as popular.
ItemPartition partition_items(const std::vector<UserSequence>& sequences,
                              int item_count, double head_fraction = 0.2);

RatioCurve ratio_curve(const std::vector<UserSequence>& sequences,
                       const ItemPartition& partition);

/// CSV rows `position,popular_count,niche_count,ratio`; infinities print as
/// "inf", the undefined marker as "nan".
std::string ratio_curve_csv(const RatioCurve& curve);

/// Content hash used to key the optional popularity-score cache.
std::uint64_t corpus_content_hash(const Corpus& corpus);

void save_scores_cache(const std::string& path, const PopularityScores& scores,
                       std::uint64_t corpus_hash);

/// Returns false when the file is absent or keyed by a different corpus.
bool load_scores_cache(const std::string& path, std::uint64_t corpus_hash,
                       PopularityScores* out);

}  // namespace bicorec

#endif  // BICOREC_POPULARITY_HPP_
