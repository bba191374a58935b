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

#ifndef BICOREC_CONFIG_HPP_
#define BICOREC_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bicorec/network.hpp"
#include "bicorec/synthetic.hpp"
#include "bicorec/training.hpp"

namespace bicorec {

/// Flat `section.key = value` configuration text. Keys are unique; later
/// assignments and command-line overrides replace earlier ones. Consumers
/// must read every key they accept so leftovers can be reported as typos.
class FlatConfig {
 public:
  static FlatConfig parse_file(const std::string& path);
  static FlatConfig parse_string(const std::string& text,
                                 const std::string& origin = "<string>");

  void apply_override(const std::string& key_eq_value);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  /// Comma-separated list value.
  std::vector<std::string> get_list(const std::string& key);

  /// Throws if any key was never read by a getter (typo safety).
  void expect_fully_consumed() const;

  /// Canonical text: sorted `key = value` lines.
  std::string echo() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> consumed_;
};

/// Everything one experiment run needs, assembled from a FlatConfig.
struct ExperimentConfig {
  std::string interactions_path;
  std::vector<std::string> aux_paths;
  int max_len = 50;
  int min_user_len = 5;
  double head_fraction = 0.2;

  NetworkConfig net;
  TrainConfig train;
  SyntheticSpec synth;

  std::uint64_t seed = 42;
  int threads = 1;
  std::vector<int> metric_ns = {10};
  int window = 50;
  bool filter_consumed = false;

  static ExperimentConfig from_file(const std::string& path,
                                    const std::vector<std::string>& overrides = {});
  static ExperimentConfig from_string(const std::string& text,
                                      const std::vector<std::string>& overrides = {});

  /// Canonical flat text of every effective setting.
  std::string echo() const;
  std::uint64_t config_hash() const;

  /// Derives the four training streams from the root seed.
  void seed_streams();
};

}  // namespace bicorec

#endif  // BICOREC_CONFIG_HPP_
