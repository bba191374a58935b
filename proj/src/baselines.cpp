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

#include "bicorec/baselines.hpp"

#include <string>

#include "bicorec/rng.hpp"

namespace bicorec {

PopRecBaseline::PopRecBaseline(const std::vector<UserSequence>& training_seqs,
                               int item_count) {
  counts_ = Eigen::VectorXd::Zero(item_count + 1);
  for (const auto& seq : training_seqs)
    for (int v : seq.positions)
      if (v != 0) counts_(v) += 1.0;
  counts_(0) = -1.0;
}

Eigen::VectorXd PopRecBaseline::scores(int /*user*/) const { return counts_; }

Eigen::VectorXd RandomBaseline::scores(int user) const {
  Rng rng = Rng::substream(seed_, "random-rec-user-" + std::to_string(user));
  Eigen::VectorXd s(item_count_ + 1);
  s(0) = -1.0;
  for (int v = 1; v <= item_count_; ++v) s(v) = rng.uniform();
  return s;
}

}  // namespace bicorec
