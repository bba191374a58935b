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

#ifndef BICOREC_TRAINING_HPP_
#define BICOREC_TRAINING_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bicorec/corpus.hpp"
#include "bicorec/network.hpp"
#include "bicorec/popularity.hpp"

namespace bicorec {

struct TrainConfig {
  double lambda = 0.3;  // weight of the consistency term
  double learning_rate = 0.001;
  double weight_decay = 0.0;
  double grad_clip = 5.0;  // global-norm clip per network, <= 0 disables
  int max_epochs = 100;
  int patience = 20;
  int batch_size = 128;
  std::uint64_t seed1 = 1;  // init seeds of the two networks, must differ
  std::uint64_t seed2 = 2;
  std::uint64_t shuffle_seed = 3;
  std::uint64_t dropout_seed = 4;
  bool cross_pseudo = true;       // false: single supervised network
  bool eval_mean_scores = false;  // average both networks' scores when ranking

  void validate() const;
};

enum class TargetKind : char { kPad, kNext };

/// Loss routing for one training sequence: every position t < n targets the
/// item at t + 1 (a padding successor routes to the consistency loss), and
/// the last position targets the held-out next item.
struct TargetLayout {
  std::vector<TargetKind> kinds;  // aligned with sequence positions
  std::vector<int> next_rows;     // 0-based rows carrying a supervised target
  std::vector<int> next_items;
  std::vector<int> pad_rows;      // 0-based rows carrying a consistency target
};

TargetLayout build_targets(const UserSequence& seq, int next_item);

/// Mean cross entropy over supervised positions, summed over the available
/// networks. Pass trace_2 = nullptr in single-network mode.
ad::Tensor supervised_loss(const ForwardTrace& trace_1,
                           const ForwardTrace* trace_2,
                           const TargetLayout& layout);

/// Bidirectional pseudo-label cross entropy over padding-target positions:
/// each network is scored against the other's hard argmax, which is treated
/// as a constant. Returns exact zero when the layout has no such positions.
ad::Tensor consistency_loss(const ForwardTrace& trace_1,
                            const ForwardTrace& trace_2,
                            const TargetLayout& layout);

ad::Tensor total_loss(const ad::Tensor& supervised, const ad::Tensor& consistency,
                      double lambda);

/// Adam with PyTorch-style L2 weight decay (added to the gradient before the
/// moment updates). Parameters without a pending gradient are skipped.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ad::Tensor> params, double learning_rate,
                double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void zero_grad();
  /// Scales all pending gradients so their global L2 norm is at most
  /// max_norm. Returns the pre-clip norm. No-op when max_norm <= 0.
  double clip_global_norm(double max_norm);
  void step();

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  struct Slot {
    ad::Tensor param;
    ad::Matrix m;
    ad::Matrix v;
    std::int64_t steps = 0;
  };
  std::vector<Slot> slots_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
};

struct TrainLogRow {
  int epoch = 0;
  std::int64_t step = 0;
  double sup_loss = 0.0;
  double cons_loss = 0.0;
  double total_loss = 0.0;
  double val_ndcg10 = 0.0;
  bool has_val = false;  // validation is measured once per epoch
  double lr = 0.0;
};

std::string train_log_csv(const std::vector<TrainLogRow>& rows);

/// Dual-network trainer state: the best parameters seen so far plus enough
/// bookkeeping to persist a resumable checkpoint.
struct DualTrainerState {
  NetworkParameters net1;
  std::optional<NetworkParameters> net2;
  double best_val_ndcg = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<TrainLogRow> log;
  std::string adam1_state;
  std::string adam2_state;
  std::string dropout_rng_state;
  std::string shuffle_rng_state;
};

/// Exact value copy of a parameter set (fresh graph leaves).
NetworkParameters clone_network(const NetworkParameters& params);

/// Trains on the leave-one-out training view with early stopping on the
/// validation NDCG@10 of network 1. The returned state holds the best
/// checkpoint of both networks.
DualTrainerState train(const SplitView& split, const PopularityModel& popularity,
                       const AuxTable* aux, const NetworkConfig& net_config,
                       const TrainConfig& train_config);

void save_dual_checkpoint(std::ostream& os, const DualTrainerState& state);
DualTrainerState load_dual_checkpoint(std::istream& is);

}  // namespace bicorec

#endif  // BICOREC_TRAINING_HPP_
