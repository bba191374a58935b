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

#include "bicorec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace bicorec {

namespace {

void append_double(std::ostringstream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

std::vector<int> left_pad_window(const std::vector<int>& items, int max_len) {
  std::vector<int> positions(static_cast<std::size_t>(max_len), 0);
  const int take = std::min<int>(max_len, static_cast<int>(items.size()));
  for (int i = 0; i < take; ++i)
    positions[static_cast<std::size_t>(max_len - take + i)] =
        items[items.size() - static_cast<std::size_t>(take) +
              static_cast<std::size_t>(i)];
  return positions;
}

double per_user_ndcg(int rank, int top_n) {
  return rank <= top_n ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

}  // namespace

int rank_target(const Eigen::VectorXd& scores, int target) {
  const int items = static_cast<int>(scores.size()) - 1;
  if (target < 1 || target > items)
    throw std::invalid_argument("rank_target: target must be a real item");
  const double target_score = scores(target);
  int rank = 1;
  for (int v = 1; v <= items; ++v) {
    if (v == target) continue;
    if (scores(v) > target_score || (scores(v) == target_score && v < target))
      ++rank;
  }
  return rank;
}

std::vector<int> top_n_items(const Eigen::VectorXd& scores, int n) {
  const int items = static_cast<int>(scores.size()) - 1;
  std::vector<int> order(static_cast<std::size_t>(items));
  std::iota(order.begin(), order.end(), 1);
  const int take = std::min(n, items);
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&](int a, int b) {
                      if (scores(a) != scores(b)) return scores(a) > scores(b);
                      return a < b;
                    });
  order.resize(static_cast<std::size_t>(take));
  return order;
}

AccuracyMetrics accuracy_metrics(const std::vector<int>& ranks, int top_n) {
  if (ranks.empty()) throw std::invalid_argument("accuracy_metrics: no ranks");
  AccuracyMetrics m;
  for (int rank : ranks) {
    if (rank < 1) throw std::invalid_argument("accuracy_metrics: rank < 1");
    if (rank <= top_n) {
      m.recall += 1.0;
      m.ndcg += per_user_ndcg(rank, top_n);
    }
    m.mrr += 1.0 / static_cast<double>(rank);
  }
  const double n = static_cast<double>(ranks.size());
  m.recall /= n;
  m.ndcg /= n;
  m.mrr /= n;
  return m;
}

FairnessMetrics fairness_metrics(const std::vector<std::vector<int>>& top_lists,
                                 const std::vector<int>& targets,
                                 const AuxTable& aux,
                                 const std::vector<UserSequence>& training_seqs,
                                 int item_count) {
  if (top_lists.size() != targets.size())
    throw std::invalid_argument("fairness_metrics: lists/targets size mismatch");
  if (top_lists.empty())
    throw std::invalid_argument("fairness_metrics: no users");

  const int user_count = static_cast<int>(training_seqs.size());
  // Fraction of training users that consumed each item.
  std::vector<double> consumers(static_cast<std::size_t>(item_count) + 1, 0.0);
  Eigen::VectorXd train_counts = Eigen::VectorXd::Zero(item_count + 1);
  for (const auto& seq : training_seqs) {
    std::vector<char> seen(static_cast<std::size_t>(item_count) + 1, 0);
    for (int v : seq.positions) {
      if (v == 0) continue;
      train_counts(v) += 1.0;
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        consumers[static_cast<std::size_t>(v)] += 1.0;
      }
    }
  }
  const double log_users = std::log2(std::max(2.0, static_cast<double>(user_count)));
  const double pop_floor = 1.0 / std::max(1.0, static_cast<double>(user_count));

  const std::size_t list_n = top_lists.front().size();
  train_counts(0) = -1.0;
  const std::vector<int> pop_top =
      top_n_items(train_counts, static_cast<int>(list_n));
  std::vector<char> in_pop_top(static_cast<std::size_t>(item_count) + 1, 0);
  for (int v : pop_top) in_pop_top[static_cast<std::size_t>(v)] = 1;

  FairnessMetrics out;
  for (std::size_t u = 0; u < top_lists.size(); ++u) {
    const auto& list = top_lists[u];
    if (list.empty()) throw std::invalid_argument("fairness_metrics: empty list");

    double diversity = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        if (list[i] < 1 || list[i] > item_count || list[j] < 1 ||
            list[j] > item_count)
          throw std::invalid_argument("fairness_metrics: item outside catalog");
        const auto a = aux.vectors.row(list[i]);
        const auto b = aux.vectors.row(list[j]);
        const double na = a.norm(), nb = b.norm();
        double cosine;
        if (na == 0.0 && nb == 0.0) {
          cosine = 1.0;  // identical (zero) descriptions
        } else if (na == 0.0 || nb == 0.0) {
          cosine = 0.0;
        } else {
          cosine = a.dot(b) / (na * nb);
        }
        diversity += 1.0 - cosine;
        ++pairs;
      }
    }
    if (pairs > 0) out.diversity += diversity / pairs;

    double novelty = 0.0;
    double serendip = 0.0;
    for (int v : list) {
      const double pop = std::max(
          pop_floor, consumers[static_cast<std::size_t>(v)] /
                         std::max(1.0, static_cast<double>(user_count)));
      novelty += -std::log2(pop) / log_users;
      if (v == targets[u] && !in_pop_top[static_cast<std::size_t>(v)]) serendip += 1.0;
    }
    out.novelty += novelty / static_cast<double>(list.size());
    out.serendipity += serendip / static_cast<double>(list.size());
  }
  const double users = static_cast<double>(top_lists.size());
  out.diversity /= users;
  out.novelty /= users;
  out.serendipity /= users;
  return out;
}

GroupedAccuracy group_split_eval(const std::vector<int>& ranks,
                                 const std::vector<UserSequence>& full_sequences,
                                 const ItemPartition& partition, int top_n) {
  if (ranks.size() != full_sequences.size())
    throw std::invalid_argument("group_split_eval: ranks/sequences size mismatch");
  GroupedAccuracy out;
  std::vector<int> popular_ranks, niche_ranks;
  for (std::size_t u = 0; u < ranks.size(); ++u) {
    const int last = full_sequences[u].positions.back();
    if (last == 0)
      throw std::invalid_argument("group_split_eval: sequence ends in padding");
    if (partition.is_popular(last))
      popular_ranks.push_back(ranks[u]);
    else
      niche_ranks.push_back(ranks[u]);
  }
  out.overall = accuracy_metrics(ranks, top_n);
  out.user_count = static_cast<int>(ranks.size());
  out.popular_count = static_cast<int>(popular_ranks.size());
  out.niche_count = static_cast<int>(niche_ranks.size());
  if (!popular_ranks.empty()) out.popular = accuracy_metrics(popular_ranks, top_n);
  if (!niche_ranks.empty()) out.niche = accuracy_metrics(niche_ranks, top_n);
  return out;
}

WindowCurve sliding_window_eval(
    const std::function<Eigen::VectorXd(int user, const UserSequence&)>& scorer,
    const std::vector<UserSequence>& full_sequences, int window, int max_len,
    int top_n) {
  if (window < 1) throw std::invalid_argument("sliding_window_eval: window < 1");
  WindowCurve curve;
  curve.window = window;
  for (int j = 1;; ++j) {
    const int needed = j * window + 1;
    double ndcg_sum = 0.0;
    int eligible = 0;
    for (std::size_t u = 0; u < full_sequences.size(); ++u) {
      const auto items = full_sequences[u].real_items();
      if (static_cast<int>(items.size()) < needed) continue;
      const std::vector<int> input(items.begin() + (j - 1) * window,
                                   items.begin() + j * window);
      const int target = items[static_cast<std::size_t>(j * window)];
      UserSequence seq;
      seq.user_index = full_sequences[u].user_index;
      seq.positions = left_pad_window(input, max_len);
      seq.pad_count = std::max(0, max_len - static_cast<int>(input.size()));
      const Eigen::VectorXd scores = scorer(static_cast<int>(u), seq);
      const int rank = rank_target(scores, target);
      ndcg_sum += per_user_ndcg(rank, top_n);
      ++eligible;
    }
    if (eligible == 0) break;
    curve.ndcg.push_back(ndcg_sum / eligible);
    curve.users.push_back(eligible);
  }
  return curve;
}

std::string window_curve_csv(const WindowCurve& curve) {
  std::ostringstream out;
  out << "window,ndcg10,users\n";
  for (std::size_t j = 0; j < curve.ndcg.size(); ++j) {
    out << (j + 1) << ',';
    append_double(out, curve.ndcg[j]);
    out << ',' << curve.users[j] << '\n';
  }
  return out.str();
}

std::vector<PrPoint> precision_recall_curve(
    const std::vector<Eigen::VectorXd>& score_vectors,
    const std::vector<int>& targets, const std::vector<double>& thresholds) {
  if (score_vectors.size() != targets.size())
    throw std::invalid_argument("precision_recall_curve: size mismatch");
  if (score_vectors.empty())
    throw std::invalid_argument("precision_recall_curve: no users");

  // Per-user softmax over real items.
  std::vector<Eigen::VectorXd> probs;
  probs.reserve(score_vectors.size());
  for (const auto& scores : score_vectors) {
    const int items = static_cast<int>(scores.size()) - 1;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(items + 1);
    double max_v = -std::numeric_limits<double>::infinity();
    for (int v = 1; v <= items; ++v) max_v = std::max(max_v, scores(v));
    double denom = 0.0;
    for (int v = 1; v <= items; ++v) {
      p(v) = std::exp(scores(v) - max_v);
      denom += p(v);
    }
    p /= denom;
    probs.push_back(std::move(p));
  }

  std::vector<PrPoint> curve;
  curve.reserve(thresholds.size());
  for (double threshold : thresholds) {
    // strictly-above retrieval: items whose probability underflowed to zero
    // are never retrieved, whatever the threshold
    std::int64_t retrieved = 0;
    std::int64_t hits = 0;
    for (std::size_t u = 0; u < probs.size(); ++u) {
      const auto& p = probs[u];
      for (int v = 1; v < static_cast<int>(p.size()); ++v)
        if (p(v) > threshold) ++retrieved;
      if (p(targets[u]) > threshold) ++hits;
    }
    PrPoint point;
    point.threshold = threshold;
    point.precision = retrieved == 0
                          ? 1.0
                          : static_cast<double>(hits) / static_cast<double>(retrieved);
    point.recall = static_cast<double>(hits) / static_cast<double>(probs.size());
    curve.push_back(point);
  }
  return curve;
}

std::string pr_curve_csv(const std::vector<PrPoint>& curve) {
  std::ostringstream out;
  out << "threshold,precision,recall\n";
  for (const auto& point : curve) {
    append_double(out, point.threshold);
    out << ',';
    append_double(out, point.precision);
    out << ',';
    append_double(out, point.recall);
    out << '\n';
  }
  return out.str();
}

TTestResult paired_ttest(const std::vector<double>& a,
                         const std::vector<double>& b, int dof_override) {
  if (a.size() != b.size())
    throw std::invalid_argument("paired_ttest: unequal list lengths");
  if (a.size() < 2)
    throw std::invalid_argument("paired_ttest: need at least two pairs");

  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult result;
  result.dof = dof_override > 0 ? dof_override : static_cast<int>(n) - 1;
  if (sd == 0.0) {
    if (mean == 0.0) {
      result.t = 0.0;
      result.p = 1.0;
    } else {
      result.t = mean > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
      result.p = 0.0;
      result.infinite = true;
    }
    return result;
  }
  result.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(result.dof));
  result.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(result.t)));
  return result;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman_rho: need two equal-length series");
  const auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

}  // namespace bicorec
