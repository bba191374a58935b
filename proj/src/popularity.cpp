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

#include "bicorec/popularity.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bicorec {

namespace {
constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

constexpr char kCacheMagic[8] = {'B', 'C', 'Q', 'C', 'A', 'C', 'H', '1'};
}  // namespace

PopularityModel::PopularityModel(const std::vector<UserSequence>& sequences,
                                 int item_count)
    : sequence_count_(static_cast<int>(sequences.size())),
      user_counts_(sequences.size()),
      user_real_len_(sequences.size(), 0),
      containing_(static_cast<std::size_t>(item_count) + 1, 0) {
  for (std::size_t u = 0; u < sequences.size(); ++u) {
    for (int v : sequences[u].positions) {
      if (v == 0) continue;
      if (v < 0 || v > item_count)
        throw std::out_of_range("PopularityModel: item index out of catalog range");
      auto [it, inserted] = user_counts_[u].try_emplace(v, 0);
      if (inserted) ++containing_[static_cast<std::size_t>(v)];
      ++it->second;
      ++user_real_len_[u];
    }
  }
}

double PopularityModel::idf(int item) const {
  if (item <= 0 || item >= static_cast<int>(containing_.size()))
    throw std::out_of_range("idf: item index out of range");
  const int s_v = containing_[static_cast<std::size_t>(item)];
  if (s_v == 0)
    throw std::runtime_error("idf: item " + std::to_string(item) +
                             " appears in no sequence");
  return std::log(static_cast<double>(sequence_count_) / static_cast<double>(s_v));
}

double PopularityModel::score(int user, int item) const {
  if (item == 0) throw std::invalid_argument("score: padding has no TF-IDF");
  const auto& counts = user_counts_.at(static_cast<std::size_t>(user));
  const auto it = counts.find(item);
  if (it == counts.end()) return 0.0;
  const double tf_v = static_cast<double>(it->second) /
                      static_cast<double>(user_real_len_[static_cast<std::size_t>(user)]);
  return tf_v * idf(item);
}

Eigen::VectorXd PopularityModel::sequence_scores(int user,
                                                 const UserSequence& seq) const {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(seq.length());
  for (int t = 0; t < seq.length(); ++t) {
    const int v = seq.positions[static_cast<std::size_t>(t)];
    if (v != 0) q(t) = score(user, v);
  }
  return q;
}

double tf(int item, const UserSequence& sequence) {
  if (item == 0) throw std::invalid_argument("tf: padding has no term frequency");
  const int real = sequence.real_count();
  if (real < 1) throw std::invalid_argument("tf: sequence has no real items");
  int occurrences = 0;
  for (int v : sequence.positions)
    if (v == item) ++occurrences;
  return static_cast<double>(occurrences) / static_cast<double>(real);
}

double idf(int item, const std::vector<UserSequence>& sequences) {
  if (item <= 0) throw std::invalid_argument("idf: not a real item");
  if (sequences.empty()) throw std::invalid_argument("idf: no sequences");
  int containing = 0;
  for (const auto& seq : sequences) {
    for (int v : seq.positions) {
      if (v == item) {
        ++containing;
        break;
      }
    }
  }
  if (containing == 0)
    throw std::runtime_error("idf: item appears in no sequence");
  return std::log(static_cast<double>(sequences.size()) /
                  static_cast<double>(containing));
}

PopularityScores compute_popularity_scores(
    const std::vector<UserSequence>& sequences, int item_count) {
  if (sequences.empty())
    throw std::invalid_argument("compute_popularity_scores: empty corpus");
  const int n = sequences.front().length();
  PopularityModel model(sequences, item_count);
  PopularityScores scores;
  scores.q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sequences.size()), n);
  for (std::size_t u = 0; u < sequences.size(); ++u)
    scores.q.row(static_cast<Eigen::Index>(u)) =
        model.sequence_scores(static_cast<int>(u), sequences[u]).transpose();
  return scores;
}

ItemPartition partition_items(const std::vector<UserSequence>& sequences,
                              int item_count, double head_fraction) {
  if (head_fraction <= 0.0 || head_fraction >= 1.0)
    throw std::invalid_argument("partition_items: head_fraction must be in (0,1)");
  ItemPartition part;
  part.frequency.assign(static_cast<std::size_t>(item_count) + 1, 0);
  for (const auto& seq : sequences)
    for (int v : seq.positions)
      if (v != 0) ++part.frequency[static_cast<std::size_t>(v)];

  std::vector<int> order(static_cast<std::size_t>(item_count));
  for (int i = 0; i < item_count; ++i) order[static_cast<std::size_t>(i)] = i + 1;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto fa = part.frequency[static_cast<std::size_t>(a)];
    const auto fb = part.frequency[static_cast<std::size_t>(b)];
    if (fa != fb) return fa > fb;
    return a < b;
  });

  const auto head = static_cast<std::size_t>(
      std::ceil(head_fraction * static_cast<double>(item_count)));
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < head)
      part.popular.insert(order[i]);
    else
      part.niche.insert(order[i]);
  }
  return part;
}

RatioCurve ratio_curve(const std::vector<UserSequence>& sequences,
                       const ItemPartition& partition) {
  if (sequences.empty()) throw std::invalid_argument("ratio_curve: no sequences");
  const int n = sequences.front().length();
  RatioCurve curve;
  curve.popular_count.assign(static_cast<std::size_t>(n), 0);
  curve.niche_count.assign(static_cast<std::size_t>(n), 0);
  curve.ratio.assign(static_cast<std::size_t>(n), 0.0);
  for (const auto& seq : sequences) {
    for (int t = 0; t < seq.length(); ++t) {
      const int v = seq.positions[static_cast<std::size_t>(t)];
      if (v == 0) continue;
      if (partition.is_popular(v))
        ++curve.popular_count[static_cast<std::size_t>(t)];
      else
        ++curve.niche_count[static_cast<std::size_t>(t)];
    }
  }
  for (int t = 0; t < n; ++t) {
    const auto p = curve.popular_count[static_cast<std::size_t>(t)];
    const auto q = curve.niche_count[static_cast<std::size_t>(t)];
    if (q > 0) {
      curve.ratio[static_cast<std::size_t>(t)] =
          static_cast<double>(p) / static_cast<double>(q);
    } else if (p > 0) {
      curve.ratio[static_cast<std::size_t>(t)] =
          std::numeric_limits<double>::infinity();
    } else {
      curve.ratio[static_cast<std::size_t>(t)] =
          std::numeric_limits<double>::quiet_NaN();
    }
  }
  return curve;
}

std::string ratio_curve_csv(const RatioCurve& curve) {
  std::ostringstream out;
  out << "position,popular_count,niche_count,ratio\n";
  for (std::size_t t = 0; t < curve.ratio.size(); ++t) {
    out << (t + 1) << ',' << curve.popular_count[t] << ',' << curve.niche_count[t]
        << ',';
    const double r = curve.ratio[t];
    if (std::isnan(r)) {
      out << "nan";
    } else if (std::isinf(r)) {
      out << "inf";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", r);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::uint64_t corpus_content_hash(const Corpus& corpus) {
  std::uint64_t h = kFnvOffset;
  const auto mix_str = [&h](const std::string& s) {
    const std::size_t len = s.size();
    h = fnv1a(h, &len, sizeof(len));
    h = fnv1a(h, s.data(), s.size());
  };
  for (const auto& u : corpus.catalog.users) mix_str(u);
  for (const auto& i : corpus.catalog.items) mix_str(i);
  h = fnv1a(h, &corpus.max_len, sizeof(corpus.max_len));
  for (const auto& seq : corpus.sequences)
    h = fnv1a(h, seq.positions.data(), seq.positions.size() * sizeof(int));
  return h;
}

void save_scores_cache(const std::string& path, const PopularityScores& scores,
                       std::uint64_t corpus_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_scores_cache: cannot write " + path);
  out.write(kCacheMagic, sizeof(kCacheMagic));
  out.write(reinterpret_cast<const char*>(&corpus_hash), sizeof(corpus_hash));
  const std::int64_t rows = scores.q.rows();
  const std::int64_t cols = scores.q.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(scores.q.data()),
            static_cast<std::streamsize>(sizeof(double) * scores.q.size()));
  if (!out) throw std::runtime_error("save_scores_cache: write failed");
}

bool load_scores_cache(const std::string& path, std::uint64_t corpus_hash,
                       PopularityScores* out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint64_t hash = 0;
  std::int64_t rows = 0, cols = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&hash), sizeof(hash));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0 ||
      hash != corpus_hash || rows <= 0 || cols <= 0)
    return false;
  out->q.resize(rows, cols);
  in.read(reinterpret_cast<char*>(out->q.data()),
          static_cast<std::streamsize>(sizeof(double) * out->q.size()));
  return static_cast<bool>(in);
}

}  // namespace bicorec
