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

#include "bicorec/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bicorec {

namespace {

std::runtime_error parse_error(const std::string& path, std::size_t line,
                               const std::string& what) {
  std::ostringstream ss;
  ss << path << ":" << line << ": " << what;
  return std::runtime_error(ss.str());
}

std::vector<int> left_pad(const std::vector<int>& items, int max_len) {
  std::vector<int> positions(static_cast<std::size_t>(max_len), 0);
  const int take = std::min<int>(max_len, static_cast<int>(items.size()));
  for (int i = 0; i < take; ++i)
    positions[static_cast<std::size_t>(max_len - take + i)] =
        items[items.size() - static_cast<std::size_t>(take) + static_cast<std::size_t>(i)];
  return positions;
}

UserSequence make_sequence(int user_index, const std::vector<int>& items, int max_len) {
  UserSequence seq;
  seq.user_index = user_index;
  seq.positions = left_pad(items, max_len);
  seq.pad_count = std::max(0, max_len - static_cast<int>(items.size()));
  return seq;
}

}  // namespace

std::vector<char> UserSequence::real_mask() const {
  std::vector<char> mask(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) mask[i] = positions[i] != 0;
  return mask;
}

std::vector<int> UserSequence::real_items() const {
  return std::vector<int>(positions.begin() + pad_count, positions.end());
}

std::vector<Interaction> load_interactions(const std::string& path,
                                           InteractionFormat format) {
  if (format != InteractionFormat::kTsv)
    throw std::invalid_argument("load_interactions: unsupported format");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_interactions: cannot open " + path);

  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos
                                                : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos)
      throw parse_error(path, line_no, "expected user<TAB>item<TAB>timestamp");
    Interaction it;
    it.user_id = line.substr(0, tab1);
    it.item_id = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string ts = line.substr(tab2 + 1);
    if (it.user_id.empty() || it.item_id.empty())
      throw parse_error(path, line_no, "empty user or item id");
    try {
      std::size_t consumed = 0;
      it.timestamp = std::stoll(ts, &consumed);
      if (consumed != ts.size()) throw std::invalid_argument(ts);
    } catch (const std::exception&) {
      throw parse_error(path, line_no, "timestamp is not an integer: '" + ts + "'");
    }
    if (it.timestamp < 0)
      throw parse_error(path, line_no, "timestamp must be non-negative");
    out.push_back(std::move(it));
  }
  if (out.empty())
    throw std::runtime_error("load_interactions: " + path + " holds no interactions");
  return out;
}

Corpus build_corpus(const std::vector<Interaction>& interactions, int max_len,
                    int min_user_len) {
  if (max_len < 3) throw std::invalid_argument("build_corpus: max_len must be >= 3");
  if (min_user_len < 3)
    throw std::invalid_argument("build_corpus: min_user_len must be >= 3");

  // Group by user, keeping input order within each group so that the stable
  // timestamp sort breaks ties by file order.
  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    auto [it, inserted] = by_user.try_emplace(interactions[i].user_id);
    if (inserted) user_order.push_back(interactions[i].user_id);
    it->second.push_back(i);
  }

  Corpus corpus;
  corpus.max_len = max_len;
  Catalog& cat = corpus.catalog;
  for (const auto& user_id : user_order) {
    auto& rows = by_user[user_id];
    if (static_cast<int>(rows.size()) < min_user_len) continue;
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return interactions[a].timestamp < interactions[b].timestamp;
    });
    const int user_index = cat.user_count();
    cat.users.push_back(user_id);
    cat.user_index.emplace(user_id, user_index);

    std::vector<int> items;
    items.reserve(rows.size());
    for (std::size_t row : rows) {
      const std::string& item_id = interactions[row].item_id;
      auto [it, inserted] = cat.item_index.try_emplace(
          item_id, cat.item_count() + 1);
      if (inserted) cat.items.push_back(item_id);
      items.push_back(it->second);
    }
    corpus.sequences.push_back(make_sequence(user_index, items, max_len));
  }

  if (corpus.sequences.empty())
    throw std::runtime_error(
        "build_corpus: no user satisfies the minimum sequence length");
  return corpus;
}

AuxTable load_aux(const std::vector<std::string>& modality_files,
                  const Catalog& catalog) {
  if (modality_files.empty())
    throw std::invalid_argument("load_aux: no modality files given");

  std::vector<std::unordered_map<int, std::vector<double>>> per_file;
  std::vector<int> dims;
  for (const auto& path : modality_files) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_aux: cannot open " + path);
    std::unordered_map<int, std::vector<double>> table;
    int dim = -1;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw parse_error(path, line_no, "expected item_id<TAB>v1,v2,...");
      const std::string item_id = line.substr(0, tab);
      const auto cat_it = catalog.item_index.find(item_id);
      if (cat_it == catalog.item_index.end()) continue;  // item filtered out

      std::vector<double> values;
      std::stringstream fields(line.substr(tab + 1));
      std::string field;
      while (std::getline(fields, field, ',')) {
        try {
          std::size_t consumed = 0;
          values.push_back(std::stod(field, &consumed));
          if (consumed != field.size()) throw std::invalid_argument(field);
        } catch (const std::exception&) {
          throw parse_error(path, line_no, "bad float '" + field + "'");
        }
        if (!std::isfinite(values.back()))
          throw parse_error(path, line_no, "non-finite feature value");
      }
      if (values.empty()) throw parse_error(path, line_no, "empty vector");
      if (dim == -1) {
        dim = static_cast<int>(values.size());
      } else if (dim != static_cast<int>(values.size())) {
        throw parse_error(path, line_no, "vector dimension mismatch within file");
      }
      table[cat_it->second] = std::move(values);
    }
    std::vector<std::string> missing;
    for (int idx = 1; idx <= catalog.item_count(); ++idx)
      if (!table.count(idx)) missing.push_back(catalog.item_id(idx));
    if (!missing.empty()) {
      std::ostringstream ss;
      ss << "load_aux: " << path << " misses " << missing.size() << " item(s):";
      for (std::size_t i = 0; i < missing.size() && i < 10; ++i) ss << " " << missing[i];
      if (missing.size() > 10) ss << " ...";
      throw std::runtime_error(ss.str());
    }
    per_file.push_back(std::move(table));
    dims.push_back(dim);
  }

  int total_dim = 0;
  for (int d : dims) total_dim += d;
  AuxTable aux;
  aux.vectors = Eigen::MatrixXd::Zero(catalog.item_count() + 1, total_dim);
  for (int idx = 1; idx <= catalog.item_count(); ++idx) {
    int offset = 0;
    for (std::size_t f = 0; f < per_file.size(); ++f) {
      const auto& vec = per_file[f].at(idx);
      for (std::size_t j = 0; j < vec.size(); ++j)
        aux.vectors(idx, offset + static_cast<int>(j)) = vec[j];
      offset += dims[f];
    }
  }
  return aux;
}

UserSequence SplitView::test_input(std::size_t user) const {
  const SplitUser& su = users.at(user);
  std::vector<int> items;
  for (int v : su.train.positions)
    if (v != 0) items.push_back(v);
  items.push_back(su.valid_target);
  if (static_cast<int>(items.size()) > max_len)
    items.erase(items.begin(), items.end() - max_len);
  return make_sequence(su.train.user_index, items, max_len);
}

SplitView leave_one_out(const Corpus& corpus) {
  SplitView view;
  view.max_len = corpus.max_len;
  view.users.reserve(corpus.sequences.size());
  for (const auto& seq : corpus.sequences) {
    const auto items = seq.real_items();
    if (items.size() < 3) {
      std::ostringstream ss;
      ss << "leave_one_out: user " << seq.user_index << " has "
         << items.size() << " real items; need at least 3";
      throw std::runtime_error(ss.str());
    }
    SplitUser su;
    su.test_target = items.back();
    su.valid_target = items[items.size() - 2];
    const std::vector<int> train_items(items.begin(), items.end() - 2);
    su.train = make_sequence(seq.user_index, train_items, corpus.max_len);
    view.users.push_back(std::move(su));
  }
  return view;
}

CorpusStats stats_from_counts(std::int64_t users, std::int64_t items,
                              std::int64_t interactions) {
  if (users <= 0 || items <= 0)
    throw std::invalid_argument("stats_from_counts: empty corpus");
  CorpusStats s;
  s.user_count = users;
  s.item_count = items;
  s.interaction_count = interactions;
  s.avg_sequence_length =
      static_cast<double>(interactions) / static_cast<double>(users);
  s.sparsity = 1.0 - static_cast<double>(interactions) /
                         (static_cast<double>(users) * static_cast<double>(items));
  s.log_user_item_ratio =
      std::log(static_cast<double>(users) / static_cast<double>(items));
  return s;
}

CorpusStats corpus_stats(const Catalog& catalog,
                         const std::vector<UserSequence>& sequences) {
  if (catalog.user_count() == 0 || catalog.item_count() == 0 || sequences.empty())
    throw std::runtime_error("corpus_stats: empty corpus");

  std::int64_t interactions = 0;
  std::vector<std::int64_t> freq(static_cast<std::size_t>(catalog.item_count()) + 1, 0);
  for (const auto& seq : sequences) {
    interactions += seq.real_count();
    for (int v : seq.positions)
      if (v != 0) ++freq[static_cast<std::size_t>(v)];
  }

  CorpusStats s = stats_from_counts(catalog.user_count(), catalog.item_count(),
                                    interactions);

  const double n_items = static_cast<double>(catalog.item_count());
  double mean = 0.0;
  for (int v = 1; v <= catalog.item_count(); ++v)
    mean += static_cast<double>(freq[static_cast<std::size_t>(v)]);
  mean /= n_items;
  double m2 = 0.0, m3 = 0.0;
  for (int v = 1; v <= catalog.item_count(); ++v) {
    const double d = static_cast<double>(freq[static_cast<std::size_t>(v)]) - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n_items;
  m3 /= n_items;
  s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return s;
}

std::string stats_to_json(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["users"] = stats.user_count;
  j["items"] = stats.item_count;
  j["interactions"] = stats.interaction_count;
  j["avg_sequence_length"] = stats.avg_sequence_length;
  j["log_user_item_ratio"] = stats.log_user_item_ratio;
  j["skewness"] = stats.skewness;
  j["sparsity"] = stats.sparsity;
  return j.dump(2) + "\n";
}

}  // namespace bicorec
