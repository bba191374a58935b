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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "bicorec/corpus.hpp"
#include "bicorec/rng.hpp"

using namespace bicorec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("bicorec_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path file(const std::string& name, const std::string& content) const {
    fs::path p = path / name;
    std::ofstream out(p);
    out << content;
    return p;
  }
};

std::vector<Interaction> toy_interactions() {
  return {
      {"u1", "a", 10}, {"u1", "b", 20}, {"u1", "c", 30},
      {"u2", "b", 5},  {"u2", "c", 6},  {"u2", "a", 7}, {"u2", "d", 8},
  };
}

}  // namespace

TEST_CASE("load_interactions parses rows in order") {
  TempDir tmp;
  const auto path = tmp.file("inter.tsv",
                             "# header comment\n"
                             "u1\ti1\t100\n"
                             "u2\ti2\t50\n"
                             "u1\ti3\t200\n");
  const auto rows = load_interactions(path.string());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].user_id == "u1");
  CHECK(rows[0].item_id == "i1");
  CHECK(rows[0].timestamp == 100);
  CHECK(rows[1].user_id == "u2");
  CHECK(rows[2].item_id == "i3");
}

TEST_CASE("load_interactions reports the offending line") {
  TempDir tmp;
  const auto path = tmp.file("bad.tsv",
                             "u1\ti1\t100\n"
                             "u2\ti2\tnot_a_number\n");
  CHECK_THROWS_WITH_AS(load_interactions(path.string()),
                       doctest::Contains(":2:"), std::runtime_error);

  const auto empty = tmp.file("empty.tsv", "# only a comment\n");
  CHECK_THROWS(load_interactions(empty.string()));

  const auto short_row = tmp.file("short.tsv", "u1\ti1\n");
  CHECK_THROWS_WITH_AS(load_interactions(short_row.string()),
                       doctest::Contains(":1:"), std::runtime_error);
}

TEST_CASE("build_corpus left-pads short histories") {
  std::vector<Interaction> rows = {
      {"u1", "a", 1}, {"u1", "b", 2}, {"u1", "c", 3}};
  const Corpus corpus = build_corpus(rows, /*max_len=*/5, /*min_user_len=*/3);
  REQUIRE(corpus.sequences.size() == 1);
  const auto& seq = corpus.sequences[0];
  CHECK(seq.pad_count == 2);
  const int a = corpus.catalog.item_index.at("a");
  const int b = corpus.catalog.item_index.at("b");
  const int c = corpus.catalog.item_index.at("c");
  CHECK(seq.positions == std::vector<int>{0, 0, a, b, c});
}

TEST_CASE("build_corpus keeps the most recent items when truncating") {
  std::vector<Interaction> rows;
  for (int t = 1; t <= 7; ++t)
    rows.push_back({"u1", "i" + std::to_string(t), t});
  const Corpus corpus = build_corpus(rows, /*max_len=*/5, /*min_user_len=*/3);
  const auto& seq = corpus.sequences[0];
  CHECK(seq.pad_count == 0);
  for (int i = 0; i < 5; ++i) {
    const int item = seq.positions[static_cast<std::size_t>(i)];
    CHECK(corpus.catalog.item_id(item) == "i" + std::to_string(i + 3));
  }
}

TEST_CASE("build_corpus sorts by timestamp with stable ties") {
  std::vector<Interaction> rows = {
      {"u1", "late", 50}, {"u1", "tie_first", 10}, {"u1", "tie_second", 10},
      {"u1", "early", 5}};
  const Corpus corpus = build_corpus(rows, 4, 3);
  const auto& cat = corpus.catalog;
  const auto& seq = corpus.sequences[0];
  CHECK(cat.item_id(seq.positions[0]) == "early");
  CHECK(cat.item_id(seq.positions[1]) == "tie_first");
  CHECK(cat.item_id(seq.positions[2]) == "tie_second");
  CHECK(cat.item_id(seq.positions[3]) == "late");
}

TEST_CASE("build_corpus drops short users and can fail empty") {
  auto rows = toy_interactions();
  const Corpus corpus = build_corpus(rows, 5, /*min_user_len=*/4);
  CHECK(corpus.sequences.size() == 1);  // only u2 has 4 interactions
  CHECK(corpus.catalog.users == std::vector<std::string>{"u2"});

  CHECK_THROWS(build_corpus(rows, 5, /*min_user_len=*/10));
}

TEST_CASE("padded fraction matches a brute-force count over raw histories") {
  Rng rng(321);
  const int n = 12;
  std::vector<Interaction> rows;
  std::map<std::string, int> raw_lengths;
  for (int u = 0; u < 100; ++u) {
    // geometric-ish length in [3, 40]
    int len = 3;
    while (len < 40 && rng.uniform() < 0.85) ++len;
    const std::string user = "u" + std::to_string(u);
    raw_lengths[user] = len;
    for (int t = 0; t < len; ++t)
      rows.push_back({user, "i" + std::to_string(rng.uniform_int(50)), t});
  }
  const Corpus corpus = build_corpus(rows, n, 3);

  std::int64_t expected_pads = 0;
  for (const auto& [user, len] : raw_lengths)
    expected_pads += std::max(0, n - len);
  std::int64_t got_pads = 0;
  std::int64_t got_zeros = 0;
  for (const auto& seq : corpus.sequences) {
    got_pads += seq.pad_count;
    for (int v : seq.positions)
      if (v == 0) ++got_zeros;
  }
  CHECK(got_pads == expected_pads);
  CHECK(got_zeros == expected_pads);
}

TEST_CASE("left padding is a contiguous prefix and index maps are bijective") {
  Rng rng(55);
  std::vector<Interaction> rows;
  for (int u = 0; u < 25; ++u) {
    const int len = 3 + static_cast<int>(rng.uniform_int(15));
    for (int t = 0; t < len; ++t)
      rows.push_back({"user" + std::to_string(u),
                      "item" + std::to_string(rng.uniform_int(30)), t});
  }
  const Corpus corpus = build_corpus(rows, 10, 3);
  for (const auto& seq : corpus.sequences) {
    for (int i = 0; i < seq.length(); ++i) {
      const bool is_pad = seq.positions[static_cast<std::size_t>(i)] == 0;
      CHECK(is_pad == (i < seq.pad_count));
    }
    CHECK(seq.positions.back() != 0);
  }
  const Catalog& cat = corpus.catalog;
  for (int idx = 1; idx <= cat.item_count(); ++idx)
    CHECK(cat.item_index.at(cat.item_id(idx)) == idx);
  for (int u = 0; u < cat.user_count(); ++u)
    CHECK(cat.user_index.at(cat.users[static_cast<std::size_t>(u)]) == u);
}

TEST_CASE("load_aux concatenates modalities in declaration order") {
  TempDir tmp;
  auto rows = toy_interactions();
  const Corpus corpus = build_corpus(rows, 5, 3);

  std::string file_a, file_b;
  for (const auto& item : corpus.catalog.items) {
    file_a += item + "\t1,2,3,4,5,6,7,8\n";
    file_b += item + "\t-1,-2,-3,-4\n";
  }
  const auto path_a = tmp.file("tabular.tsv", file_a);
  const auto path_b = tmp.file("text.tsv", file_b);

  const AuxTable one = load_aux({path_a.string()}, corpus.catalog);
  CHECK(one.dim() == 8);

  const AuxTable both = load_aux({path_a.string(), path_b.string()}, corpus.catalog);
  CHECK(both.dim() == 12);
  CHECK(both.vectors(1, 0) == 1.0);
  CHECK(both.vectors(1, 8) == -1.0);
  CHECK(both.vectors.row(0).isZero());  // padding row
}

TEST_CASE("load_aux fails loudly on missing items and ragged files") {
  TempDir tmp;
  auto rows = toy_interactions();
  const Corpus corpus = build_corpus(rows, 5, 3);

  std::string partial;
  partial += corpus.catalog.items[0] + "\t1,2\n";
  const auto missing = tmp.file("partial.tsv", partial);
  CHECK_THROWS_WITH_AS(load_aux({missing.string()}, corpus.catalog),
                       doctest::Contains("misses"), std::runtime_error);

  std::string ragged;
  ragged += corpus.catalog.items[0] + "\t1,2\n";
  ragged += corpus.catalog.items[1] + "\t1,2,3\n";
  const auto ragged_path = tmp.file("ragged.tsv", ragged);
  CHECK_THROWS_WITH_AS(load_aux({ragged_path.string()}, corpus.catalog),
                       doctest::Contains("dimension mismatch"), std::runtime_error);
}

TEST_CASE("leave_one_out peels validation and test targets") {
  std::vector<Interaction> rows = {
      {"u1", "a", 1}, {"u1", "b", 2}, {"u1", "c", 3}, {"u1", "d", 4}};
  const Corpus corpus = build_corpus(rows, 6, 3);
  const SplitView view = leave_one_out(corpus);
  REQUIRE(view.users.size() == 1);
  const auto& cat = corpus.catalog;
  const auto& su = view.users[0];
  CHECK(cat.item_id(su.valid_target) == "c");
  CHECK(cat.item_id(su.test_target) == "d");
  CHECK(su.train.real_count() == 2);
  CHECK(cat.item_id(su.train.positions[4]) == "a");
  CHECK(cat.item_id(su.train.positions[5]) == "b");

  const UserSequence test_in = view.test_input(0);
  CHECK(test_in.real_count() == 3);
  CHECK(cat.item_id(test_in.positions[5]) == "c");
}

TEST_CASE("leave_one_out boundary: exactly three real items") {
  std::vector<Interaction> rows = {
      {"u1", "a", 1}, {"u1", "b", 2}, {"u1", "c", 3}};
  const Corpus corpus = build_corpus(rows, 5, 3);
  const SplitView view = leave_one_out(corpus);
  CHECK(view.users[0].train.real_count() == 1);
}

TEST_CASE("split reconstruction recovers the original real items") {
  Rng rng(77);
  std::vector<Interaction> rows;
  for (int u = 0; u < 40; ++u) {
    const int len = 3 + static_cast<int>(rng.uniform_int(12));
    for (int t = 0; t < len; ++t)
      rows.push_back({"u" + std::to_string(u),
                      "i" + std::to_string(rng.uniform_int(25)), t});
  }
  // max_len chosen large enough that no training items are retruncated away
  const Corpus corpus = build_corpus(rows, 16, 3);
  const SplitView view = leave_one_out(corpus);
  REQUIRE(view.users.size() == corpus.sequences.size());
  for (std::size_t u = 0; u < view.users.size(); ++u) {
    auto rebuilt = view.users[u].train.real_items();
    rebuilt.push_back(view.users[u].valid_target);
    rebuilt.push_back(view.users[u].test_target);
    CHECK(rebuilt == corpus.sequences[u].real_items());
  }
}

TEST_CASE("corpus_stats reproduces the closed-form fields") {
  // Movies-scale counts: sparsity should come out at 94.93%.
  const CorpusStats movies = stats_from_counts(6041, 3261, 998539);
  CHECK(movies.sparsity * 100.0 == doctest::Approx(94.93).epsilon(1e-4));
  CHECK(movies.log_user_item_ratio == doctest::Approx(0.617).epsilon(1e-2));

  const CorpusStats tiny = stats_from_counts(1, 1, 1);
  CHECK(tiny.sparsity == 0.0);
}

TEST_CASE("corpus_stats skewness matches a third-moment oracle") {
  Rng rng(99);
  std::vector<Interaction> rows;
  for (int u = 0; u < 30; ++u) {
    const int len = 3 + static_cast<int>(rng.uniform_int(20));
    for (int t = 0; t < len; ++t) {
      // Zipf-flavored item choice to get a skewed frequency profile.
      const int item = static_cast<int>(rng.uniform() * rng.uniform() * 40);
      rows.push_back({"u" + std::to_string(u), "i" + std::to_string(item), t});
    }
  }
  const Corpus corpus = build_corpus(rows, 32, 3);
  const CorpusStats stats = corpus_stats(corpus.catalog, corpus.sequences);

  // Independent oracle: recount frequencies and apply the moment formulas.
  std::map<int, double> freq;
  double total = 0.0;
  for (const auto& seq : corpus.sequences)
    for (int v : seq.positions)
      if (v != 0) {
        freq[v] += 1.0;
        total += 1.0;
      }
  std::vector<double> counts;
  for (int idx = 1; idx <= corpus.catalog.item_count(); ++idx)
    counts.push_back(freq.count(idx) ? freq[idx] : 0.0);
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= static_cast<double>(counts.size());
  double m2 = 0.0, m3 = 0.0;
  for (double c : counts) {
    m2 += (c - mean) * (c - mean);
    m3 += (c - mean) * (c - mean) * (c - mean);
  }
  m2 /= static_cast<double>(counts.size());
  m3 /= static_cast<double>(counts.size());
  CHECK(stats.skewness == doctest::Approx(m3 / std::pow(m2, 1.5)).epsilon(1e-12));
  CHECK(stats.interaction_count == static_cast<std::int64_t>(total));
  CHECK(stats.avg_sequence_length ==
        doctest::Approx(total / corpus.catalog.user_count()));

  const std::string json = stats_to_json(stats);
  CHECK(json.find("\"sparsity\"") != std::string::npos);
  CHECK(json.find("\"skewness\"") != std::string::npos);
}
