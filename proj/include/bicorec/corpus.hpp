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

#ifndef BICOREC_CORPUS_HPP_
#define BICOREC_CORPUS_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace bicorec {

/// One user-item event. Interactions are presence-only; there is no rating.
struct Interaction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
};

/// Dense id maps. Item indices live in [1, item_count()]; index 0 is the
/// padding slot and is never assigned to a real item. User indices are
/// 0-based. Order of both lists is first appearance in the input.
struct Catalog {
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::unordered_map<std::string, int> user_index;
  std::unordered_map<std::string, int> item_index;

  int user_count() const { return static_cast<int>(users.size()); }
  int item_count() const { return static_cast<int>(items.size()); }
  const std::string& item_id(int index) const { return items.at(static_cast<std::size_t>(index - 1)); }
};

/// Fixed-length, left-padded item index sequence for one user. Zeros occupy
/// a contiguous prefix; the last position is always a real item.
struct UserSequence {
  int user_index = 0;
  std::vector<int> positions;  // length n, oldest -> newest
  int pad_count = 0;

  int length() const { return static_cast<int>(positions.size()); }
  int real_count() const { return length() - pad_count; }
  /// 1 for real positions, 0 for padding; aligned with `positions`.
  std::vector<char> real_mask() const;
  /// The real items in chronological order.
  std::vector<int> real_items() const;
};

struct Corpus {
  Catalog catalog;
  std::vector<UserSequence> sequences;
  int max_len = 0;
};

/// Per-item auxiliary feature vectors, concatenated over modality files.
/// Row 0 (padding) is all zeros.
struct AuxTable {
  Eigen::MatrixXd vectors;  // (item_count + 1) x dim
  int dim() const { return static_cast<int>(vectors.cols()); }
};

/// Leave-one-out views: the last real item of every user is the test target,
/// the one before it the validation target, and the rest (re-padded) the
/// training sequence.
struct SplitUser {
  UserSequence train;
  int valid_target = 0;
  int test_target = 0;
};

struct SplitView {
  std::vector<SplitUser> users;
  int max_len = 0;

  /// Input for test-time ranking: the training items plus the validation
  /// item, re-padded/truncated to max_len.
  UserSequence test_input(std::size_t user) const;
};

struct CorpusStats {
  std::int64_t user_count = 0;
  std::int64_t item_count = 0;
  std::int64_t interaction_count = 0;
  double avg_sequence_length = 0.0;
  double sparsity = 0.0;             // 1 - interactions / (users * items)
  double log_user_item_ratio = 0.0;  // natural log of users/items
  double skewness = 0.0;             // of the item-frequency distribution
};

enum class InteractionFormat { kTsv };

/// Parses `user_id<TAB>item_id<TAB>timestamp` rows. Lines starting with '#'
/// are comments. Throws with a line number on malformed rows and on empty
/// inputs.
std::vector<Interaction> load_interactions(
    const std::string& path, InteractionFormat format = InteractionFormat::kTsv);

/// Groups interactions per user (stable order for equal timestamps), drops
/// users with fewer than `min_user_len` events, truncates to the most recent
/// `max_len` items and left-pads shorter histories.
Corpus build_corpus(const std::vector<Interaction>& interactions, int max_len,
                    int min_user_len = 5);

/// Reads one or more modality files (`item_id<TAB>v1,v2,...`) and
/// concatenates each item's vectors in file order. Every catalog item must
/// appear in every file.
AuxTable load_aux(const std::vector<std::string>& modality_files,
                  const Catalog& catalog);

SplitView leave_one_out(const Corpus& corpus);

CorpusStats corpus_stats(const Catalog& catalog,
                         const std::vector<UserSequence>& sequences);

/// The closed-form part of the stats (sparsity, log ratio) from raw counts.
CorpusStats stats_from_counts(std::int64_t users, std::int64_t items,
                              std::int64_t interactions);

std::string stats_to_json(const CorpusStats& stats);

}  // namespace bicorec

#endif  // BICOREC_CORPUS_HPP_
