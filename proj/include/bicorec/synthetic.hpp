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

#ifndef BICOREC_SYNTHETIC_HPP_
#define BICOREC_SYNTHETIC_HPP_

#include <cstdint>
#include <string>

namespace bicorec {

/// Generator of interaction logs with a controllable popularity drift: the
/// probability of picking from the popular head decays per position, which
/// reproduces a decreasing popular-to-niche ratio over the sequence.
struct SyntheticSpec {
  int user_count = 1000;
  int item_count = 200;
  double zipf_exponent = 1.1;       // within-set frequency skew
  double drift = 0.05;              // per-position decay of the popular choice
  double popular_start_prob = 0.9;  // popular-choice probability at position 1
  double head_fraction = 0.2;       // share of items designated popular
  int min_len = 20;                 // sequence lengths drawn uniformly
  int max_len = 20;
  int aux_dim = 8;
  std::uint64_t seed = 1;

  void validate() const;
};

/// TSV interaction log (user, item, timestamp), bytewise-deterministic for a
/// fixed spec.
std::string generate_synthetic_tsv(const SyntheticSpec& spec);

/// Per-item auxiliary vectors: a popular/niche group center plus noise.
std::string generate_synthetic_aux_tsv(const SyntheticSpec& spec);

void write_synthetic(const SyntheticSpec& spec,
                     const std::string& interactions_path,
                     const std::string& aux_path);

}  // namespace bicorec

#endif  // BICOREC_SYNTHETIC_HPP_
