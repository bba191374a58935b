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

#ifndef BICOREC_EXPERIMENT_HPP_
#define BICOREC_EXPERIMENT_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bicorec/baselines.hpp"
#include "bicorec/config.hpp"
#include "bicorec/corpus.hpp"
#include "bicorec/evaluation.hpp"
#include "bicorec/network.hpp"
#include "bicorec/popularity.hpp"
#include "bicorec/training.hpp"

namespace bicorec {

/// Deterministic chunked parallel map; results must go into per-index slots.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

/// Everything the training and evaluation stages share: corpus, splits, the
/// training-view popularity tables, aux features and the item partition.
struct PreparedData {
  Corpus corpus;
  SplitView split;
  std::vector<UserSequence> train_view;
  PopularityModel popularity;
  std::optional<AuxTable> aux;
  ItemPartition partition;
};

PreparedData prepare_data(const ExperimentConfig& config);

/// Network config with the data-dependent fields (aux width) filled in.
NetworkConfig effective_net_config(const ExperimentConfig& config,
                                   const PreparedData& data);

/// Full-catalog scores for one arbitrary input sequence of a known user.
Eigen::VectorXd model_scores(const PreparedData& data, const NetworkConfig& net,
                             NetworkParameters& net1, NetworkParameters* net2,
                             bool mean_scores, int user,
                             const UserSequence& input);

struct ModelEvalResult {
  std::vector<int> ranks;
  std::vector<std::vector<int>> top_lists;          // at the largest metric N
  std::vector<Eigen::VectorXd> score_vectors;       // per user, full catalog
};

/// Ranks every user's held-out test item against the whole catalog.
ModelEvalResult evaluate_model(const PreparedData& data, const NetworkConfig& net,
                               NetworkParameters& net1, NetworkParameters* net2,
                               bool mean_scores, bool filter_consumed,
                               int top_n, int threads);

/// Builds the metrics.json payload (accuracy + groups + fairness + the
/// PopRec/random reference points) and writes the window and PR curves when
/// `out_dir` is non-empty.
std::string evaluate_state(const ExperimentConfig& config, PreparedData& data,
                           DualTrainerState& state, const std::string& out_dir);

// ---- run-directory commands (shared by the CLI and the bindings) ----------

void run_prepare(const ExperimentConfig& config, const std::string& out_dir);
void run_analyze(const ExperimentConfig& config, const std::string& out_dir,
                 bool write_cache = false);
DualTrainerState run_train(const ExperimentConfig& config,
                           const std::string& out_dir);
std::string run_evaluate(const ExperimentConfig& config,
                         const std::string& out_dir);
void run_ablate(const ExperimentConfig& config, const std::string& out_dir);
void run_synth(const ExperimentConfig& config, const std::string& out_dir);

/// Merges per-run metrics and reports a paired t-test of runs_a vs runs_b on
/// the dotted metric path (e.g. "model.overall.ndcg@10").
std::string run_report(const std::vector<std::string>& runs_a,
                       const std::vector<std::string>& runs_b,
                       const std::string& metric, int dof_override,
                       const std::string& out_dir);

}  // namespace bicorec

#endif  // BICOREC_EXPERIMENT_HPP_
