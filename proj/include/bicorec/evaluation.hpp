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

#ifndef BICOREC_EVALUATION_HPP_
#define BICOREC_EVALUATION_HPP_

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "bicorec/corpus.hpp"
#include "bicorec/popularity.hpp"

namespace bicorec {

/// 1-based rank of `target` in a full-catalog score vector (index 0 is the
/// padding slot and never competes). Ties count items with a lower index
/// ahead of the target, so ranking is deterministic.
int rank_target(const Eigen::VectorXd& scores, int target);

/// Top-n real items by score, ties broken by ascending item index.
std::vector<int> top_n_items(const Eigen::VectorXd& scores, int n);

struct AccuracyMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
};

/// Recall@N, NDCG@N and MRR over per-user ranks of the held-out item.
AccuracyMetrics accuracy_metrics(const std::vector<int>& ranks, int top_n);

struct FairnessMetrics {
  double diversity = 0.0;    // mean pairwise (1 - cosine) of aux vectors
  double novelty = 0.0;      // mean -log2(pop) / log2(user_count)
  double serendipity = 0.0;  // relevant recommendations outside the popularity top-N
};

/// List-quality metrics over per-user top-N recommendations. Popularity is
/// measured on the training sequences; the serendipity baseline is the
/// training-count top-N.
FairnessMetrics fairness_metrics(const std::vector<std::vector<int>>& top_lists,
                                 const std::vector<int>& targets,
                                 const AuxTable& aux,
                                 const std::vector<UserSequence>& training_seqs,
                                 int item_count);

struct GroupedAccuracy {
  AccuracyMetrics overall;
  int user_count = 0;
  std::optional<AccuracyMetrics> popular;  // users whose last item is popular
  int popular_count = 0;
  std::optional<AccuracyMetrics> niche;
  int niche_count = 0;
};

/// Splits users by whether the last real item of their full sequence falls
/// in the popular set, then reports accuracy per group. Empty groups carry
/// no metrics and count 0.
GroupedAccuracy group_split_eval(const std::vector<int>& ranks,
                                 const std::vector<UserSequence>& full_sequences,
                                 const ItemPartition& partition, int top_n);

struct WindowCurve {
  int window = 0;
  std::vector<double> ndcg;  // NDCG@10 per window index
  std::vector<int> users;    // eligible users per window
};

/// Non-overlapping sliding-window protocol: window j feeds real items
/// [(j-1)W+1 .. jW] (left-padded/truncated to `max_len`) and ranks item
/// jW+1. Only users with enough history count toward a window.
WindowCurve sliding_window_eval(
    const std::function<Eigen::VectorXd(int user, const UserSequence&)>& scorer,
    const std::vector<UserSequence>& full_sequences, int window, int max_len,
    int top_n = 10);

std::string window_curve_csv(const WindowCurve& curve);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Sweeps a decision threshold over per-user softmax probabilities of the
/// held-out item: at each threshold a user "retrieves" every item whose
/// probability clears it, and precision/recall are micro-averaged over the
/// retrieval of the single relevant item.
std::vector<PrPoint> precision_recall_curve(
    const std::vector<Eigen::VectorXd>& score_vectors,
    const std::vector<int>& targets, const std::vector<double>& thresholds);

std::string pr_curve_csv(const std::vector<PrPoint>& curve);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int dof = 0;
  bool infinite = false;  // zero-variance differences with nonzero mean
};

/// Two-sided paired t-test. dof defaults to pairs-1; `dof_override` (> 0)
/// substitutes a fixed dof for the p-value.
TTestResult paired_ttest(const std::vector<double>& a,
                         const std::vector<double>& b, int dof_override = -1);

/// Spearman rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace bicorec

#endif  // BICOREC_EVALUATION_HPP_
