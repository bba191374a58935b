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

#ifndef BICOREC_BASELINES_HPP_
#define BICOREC_BASELINES_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "bicorec/corpus.hpp"

namespace bicorec {

/// Ranks items by their training-view interaction count; every user receives
/// the same score vector.
class PopRecBaseline {
 public:
  PopRecBaseline(const std::vector<UserSequence>& training_seqs, int item_count);
  Eigen::VectorXd scores(int user) const;
  const Eigen::VectorXd& counts() const { return counts_; }

 private:
  Eigen::VectorXd counts_;  // index 0 unused
};

/// Uniform random scores, reproducible per (seed, user).
class RandomBaseline {
 public:
  RandomBaseline(std::uint64_t seed, int item_count)
      : seed_(seed), item_count_(item_count) {}
  Eigen::VectorXd scores(int user) const;

 private:
  std::uint64_t seed_;
  int item_count_;
};

}  // namespace bicorec

#endif  // BICOREC_BASELINES_HPP_
