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

#include "bicorec/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "bicorec/synthetic.hpp"

namespace bicorec {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string hash_hex(std::uint64_t hash) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

ordered_json accuracy_block(const AccuracyMetrics& m,
                            const std::vector<int>& metric_ns,
                            const std::vector<int>& ranks) {
  ordered_json out;
  for (int n : metric_ns) {
    const auto at_n = accuracy_metrics(ranks, n);
    out["recall@" + std::to_string(n)] = at_n.recall;
    out["ndcg@" + std::to_string(n)] = at_n.ndcg;
  }
  out["mrr"] = m.mrr;
  return out;
}

ordered_json grouped_block(const std::vector<int>& ranks,
                           const std::vector<UserSequence>& full_sequences,
                           const ItemPartition& partition,
                           const std::vector<int>& metric_ns) {
  const int widest = *std::max_element(metric_ns.begin(), metric_ns.end());
  const GroupedAccuracy grouped =
      group_split_eval(ranks, full_sequences, partition, widest);

  std::vector<int> popular_ranks, niche_ranks;
  for (std::size_t u = 0; u < ranks.size(); ++u) {
    if (partition.is_popular(full_sequences[u].positions.back()))
      popular_ranks.push_back(ranks[u]);
    else
      niche_ranks.push_back(ranks[u]);
  }

  ordered_json out;
  out["overall"] = accuracy_block(grouped.overall, metric_ns, ranks);
  out["overall"]["count"] = grouped.user_count;
  if (grouped.popular) {
    out["popular"] = accuracy_block(*grouped.popular, metric_ns, popular_ranks);
    out["popular"]["count"] = grouped.popular_count;
  } else {
    out["popular"] = nullptr;
  }
  if (grouped.niche) {
    out["niche"] = accuracy_block(*grouped.niche, metric_ns, niche_ranks);
    out["niche"]["count"] = grouped.niche_count;
  } else {
    out["niche"] = nullptr;
  }
  return out;
}

const ordered_json* walk_path(const ordered_json& root, const std::string& path) {
  const ordered_json* node = &root;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
  }
  return node;
}

}  // namespace

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t) {
    const int begin = static_cast<int>(static_cast<std::int64_t>(count) * t / threads);
    const int end =
        static_cast<int>(static_cast<std::int64_t>(count) * (t + 1) / threads);
    pool.emplace_back([&, begin, end] {
      try {
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& worker : pool) worker.join();
  if (error) std::rethrow_exception(error);
}

PreparedData prepare_data(const ExperimentConfig& config) {
  if (config.interactions_path.empty())
    throw std::runtime_error("prepare_data: data.interactions is not set");
  const auto interactions = load_interactions(config.interactions_path);
  Corpus corpus = build_corpus(interactions, config.max_len, config.min_user_len);
  SplitView split = leave_one_out(corpus);
  std::vector<UserSequence> train_view;
  train_view.reserve(split.users.size());
  for (const auto& su : split.users) train_view.push_back(su.train);
  PopularityModel popularity(train_view, corpus.catalog.item_count());
  std::optional<AuxTable> aux;
  if (!config.aux_paths.empty()) aux = load_aux(config.aux_paths, corpus.catalog);
  ItemPartition partition = partition_items(
      corpus.sequences, corpus.catalog.item_count(), config.head_fraction);
  return PreparedData{std::move(corpus),     std::move(split),
                      std::move(train_view), std::move(popularity),
                      std::move(aux),        std::move(partition)};
}

NetworkConfig effective_net_config(const ExperimentConfig& config,
                                   const PreparedData& data) {
  NetworkConfig net = config.net;
  net.max_len = config.max_len;
  if (net.use_aux) {
    if (!data.aux)
      throw std::runtime_error("effective_net_config: aux requested but missing");
    net.aux_dim = data.aux->dim();
  } else {
    net.aux_dim = 0;
  }
  net.validate();
  return net;
}

Eigen::VectorXd model_scores(const PreparedData& data, const NetworkConfig& net,
                             NetworkParameters& net1, NetworkParameters* net2,
                             bool mean_scores, int user,
                             const UserSequence& input) {
  ad::NoGradGuard guard;
  Rng unused(0);
  const AuxTable* aux = data.aux ? &*data.aux : nullptr;
  const Eigen::VectorXd q = data.popularity.sequence_scores(user, input);
  const ForwardTrace trace = forward(input, q, aux, net, net1, Mode::kEval, unused);
  Eigen::VectorXd scores = score(trace, input);
  if (mean_scores && net2 != nullptr) {
    const ForwardTrace trace2 =
        forward(input, q, aux, net, *net2, Mode::kEval, unused);
    scores = 0.5 * (scores + score(trace2, input));
  }
  return scores;
}

ModelEvalResult evaluate_model(const PreparedData& data, const NetworkConfig& net,
                               NetworkParameters& net1, NetworkParameters* net2,
                               bool mean_scores, bool filter_consumed,
                               int top_n, int threads) {
  const int users = static_cast<int>(data.split.users.size());
  ModelEvalResult result;
  result.ranks.resize(static_cast<std::size_t>(users));
  result.top_lists.resize(static_cast<std::size_t>(users));
  result.score_vectors.resize(static_cast<std::size_t>(users));

  parallel_for(users, threads, [&](int u) {
    const UserSequence input = data.split.test_input(static_cast<std::size_t>(u));
    Eigen::VectorXd scores =
        model_scores(data, net, net1, net2, mean_scores, u, input);
    const int target = data.split.users[static_cast<std::size_t>(u)].test_target;
    if (filter_consumed) {
      for (int v : input.positions)
        if (v != 0 && v != target)
          scores(v) = -std::numeric_limits<double>::infinity();
    }
    result.ranks[static_cast<std::size_t>(u)] = rank_target(scores, target);
    result.top_lists[static_cast<std::size_t>(u)] = top_n_items(scores, top_n);
    result.score_vectors[static_cast<std::size_t>(u)] = std::move(scores);
  });
  return result;
}

std::string evaluate_state(const ExperimentConfig& config, PreparedData& data,
                           DualTrainerState& state, const std::string& out_dir) {
  const NetworkConfig net = state.net1.config();
  NetworkParameters* net2 = state.net2 ? &*state.net2 : nullptr;
  const int widest =
      *std::max_element(config.metric_ns.begin(), config.metric_ns.end());

  const ModelEvalResult model =
      evaluate_model(data, net, state.net1, net2, config.train.eval_mean_scores,
                     config.filter_consumed, widest, config.threads);

  std::vector<int> test_targets;
  for (const auto& su : data.split.users) test_targets.push_back(su.test_target);

  ordered_json report;
  report["run"] = {
      {"seed", config.seed},
      {"config_hash", hash_hex(config.config_hash())},
      {"users", data.corpus.catalog.user_count()},
      {"items", data.corpus.catalog.item_count()},
      {"best_epoch", state.best_epoch},
      {"epochs_run", state.epochs_run},
      {"val_ndcg10", state.best_val_ndcg},
  };

  report["model"] =
      grouped_block(model.ranks, data.corpus.sequences, data.partition,
                    config.metric_ns);
  if (data.aux) {
    ordered_json fairness;
    for (int n : config.metric_ns) {
      std::vector<std::vector<int>> lists;
      lists.reserve(model.top_lists.size());
      for (const auto& list : model.top_lists)
        lists.emplace_back(list.begin(),
                           list.begin() + std::min<std::size_t>(list.size(),
                                                                static_cast<std::size_t>(n)));
      const FairnessMetrics fair =
          fairness_metrics(lists, test_targets, *data.aux, data.train_view,
                           data.corpus.catalog.item_count());
      fairness["diversity@" + std::to_string(n)] = fair.diversity;
      fairness["novelty@" + std::to_string(n)] = fair.novelty;
      fairness["serendipity@" + std::to_string(n)] = fair.serendipity;
    }
    report["model"]["fairness"] = fairness;
  }

  // Reference points: the two spec'd baselines under the same protocol.
  {
    const PopRecBaseline poprec(data.train_view, data.corpus.catalog.item_count());
    const RandomBaseline random(config.seed, data.corpus.catalog.item_count());
    std::vector<int> pop_ranks(data.split.users.size());
    std::vector<int> rnd_ranks(data.split.users.size());
    for (std::size_t u = 0; u < data.split.users.size(); ++u) {
      pop_ranks[u] =
          rank_target(poprec.scores(static_cast<int>(u)), test_targets[u]);
      rnd_ranks[u] =
          rank_target(random.scores(static_cast<int>(u)), test_targets[u]);
    }
    report["baselines"]["poprec"] = grouped_block(
        pop_ranks, data.corpus.sequences, data.partition, config.metric_ns);
    report["baselines"]["random"] = grouped_block(
        rnd_ranks, data.corpus.sequences, data.partition, config.metric_ns);
  }

  if (!out_dir.empty()) {
    // plot-ready curves
    const auto scorer = [&](int user, const UserSequence& input) {
      return model_scores(data, net, state.net1, net2,
                          config.train.eval_mean_scores, user, input);
    };
    const WindowCurve window_curve = sliding_window_eval(
        scorer, data.corpus.sequences, config.window, config.max_len);
    write_file(fs::path(out_dir) / "curves" / "window.csv",
               window_curve_csv(window_curve));

    std::vector<double> thresholds;
    for (int i = 0; i <= 100; ++i) thresholds.push_back(i / 100.0);
    const auto pr =
        precision_recall_curve(model.score_vectors, test_targets, thresholds);
    write_file(fs::path(out_dir) / "curves" / "pr.csv", pr_curve_csv(pr));
  }

  const std::string payload = report.dump(2) + "\n";
  if (!out_dir.empty())
    write_file(fs::path(out_dir) / "metrics.json", payload);
  return payload;
}

void run_prepare(const ExperimentConfig& config, const std::string& out_dir) {
  const PreparedData data = prepare_data(config);
  const CorpusStats stats =
      corpus_stats(data.corpus.catalog, data.corpus.sequences);
  write_file(fs::path(out_dir) / "config.echo", config.echo());
  write_file(fs::path(out_dir) / "stats.json", stats_to_json(stats));
}

void run_analyze(const ExperimentConfig& config, const std::string& out_dir,
                 bool write_cache) {
  const PreparedData data = prepare_data(config);
  write_file(fs::path(out_dir) / "config.echo", config.echo());

  const RatioCurve curve = ratio_curve(data.corpus.sequences, data.partition);
  write_file(fs::path(out_dir) / "curves" / "ratio.csv", ratio_curve_csv(curve));

  const PopularityScores scores = compute_popularity_scores(
      data.train_view, data.corpus.catalog.item_count());
  if (write_cache)
    save_scores_cache((fs::path(out_dir) / "scores.bin").string(), scores,
                      corpus_content_hash(data.corpus));

  ordered_json analysis;
  analysis["users"] = data.corpus.catalog.user_count();
  analysis["items"] = data.corpus.catalog.item_count();
  analysis["popular_items"] = data.partition.popular.size();
  analysis["niche_items"] = data.partition.niche.size();
  std::int64_t min_pop = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_niche = 0;
  for (int v : data.partition.popular)
    min_pop = std::min(min_pop, data.partition.frequency[static_cast<std::size_t>(v)]);
  for (int v : data.partition.niche)
    max_niche =
        std::max(max_niche, data.partition.frequency[static_cast<std::size_t>(v)]);
  analysis["min_popular_frequency"] = min_pop;
  analysis["max_niche_frequency"] = max_niche;
  analysis["mean_tfidf"] =
      scores.q.sum() / static_cast<double>(scores.q.rows() * scores.q.cols());
  write_file(fs::path(out_dir) / "analysis.json", analysis.dump(2) + "\n");
}

DualTrainerState run_train(const ExperimentConfig& config,
                           const std::string& out_dir) {
  PreparedData data = prepare_data(config);
  const NetworkConfig net = effective_net_config(config, data);
  const AuxTable* aux = data.aux ? &*data.aux : nullptr;
  DualTrainerState state =
      train(data.split, data.popularity, aux, net, config.train);

  write_file(fs::path(out_dir) / "config.echo", config.echo());
  write_file(fs::path(out_dir) / "train.csv", train_log_csv(state.log));
  std::ostringstream checkpoint;
  save_dual_checkpoint(checkpoint, state);
  write_file(fs::path(out_dir) / "checkpoint.bin", checkpoint.str());
  return state;
}

std::string run_evaluate(const ExperimentConfig& config,
                         const std::string& out_dir) {
  PreparedData data = prepare_data(config);
  const fs::path checkpoint_path = fs::path(out_dir) / "checkpoint.bin";
  std::ifstream in(checkpoint_path, std::ios::binary);
  if (!in)
    throw std::runtime_error("run_evaluate: missing " + checkpoint_path.string());
  DualTrainerState state = load_dual_checkpoint(in);
  return evaluate_state(config, data, state, out_dir);
}

void run_ablate(const ExperimentConfig& config, const std::string& out_dir) {
  struct Variant {
    const char* name;
    std::function<void(ExperimentConfig&)> tweak;
  };
  const std::vector<Variant> variants = {
      {"full", [](ExperimentConfig&) {}},
      {"no_cross_pseudo",
       [](ExperimentConfig& c) { c.train.cross_pseudo = false; }},
      {"no_aux", [](ExperimentConfig& c) { c.net.use_aux = false; }},
      {"no_coattention",
       [](ExperimentConfig& c) { c.net.use_coattention = false; }},
      {"no_user_embedding",
       [](ExperimentConfig& c) { c.net.use_popularity_embedding = false; }},
  };

  ordered_json summary;
  for (const auto& variant : variants) {
    ExperimentConfig variant_config = config;
    variant.tweak(variant_config);
    const std::string variant_dir =
        (fs::path(out_dir) / variant.name).string();
    try {
      PreparedData data = prepare_data(variant_config);
      const NetworkConfig net = effective_net_config(variant_config, data);
      const AuxTable* aux = data.aux ? &*data.aux : nullptr;
      DualTrainerState state =
          train(data.split, data.popularity, aux, net, variant_config.train);
      write_file(fs::path(variant_dir) / "config.echo", variant_config.echo());
      write_file(fs::path(variant_dir) / "train.csv", train_log_csv(state.log));
      std::ostringstream checkpoint;
      save_dual_checkpoint(checkpoint, state);
      write_file(fs::path(variant_dir) / "checkpoint.bin", checkpoint.str());
      const std::string metrics =
          evaluate_state(variant_config, data, state, variant_dir);
      const ordered_json parsed = ordered_json::parse(metrics);
      summary[variant.name] = {
          {"config_hash", hash_hex(variant_config.config_hash())},
          {"val_ndcg10", state.best_val_ndcg},
          {"model", parsed["model"]},
      };
    } catch (const std::exception& error) {
      throw std::runtime_error("run_ablate: variant '" +
                               std::string(variant.name) + "' failed: " +
                               error.what());
    }
  }
  write_file(fs::path(out_dir) / "ablation.json", summary.dump(2) + "\n");
}

void run_synth(const ExperimentConfig& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_synthetic(config.synth,
                  (fs::path(out_dir) / "interactions.tsv").string(),
                  (fs::path(out_dir) / "aux.tsv").string());
}

std::string run_report(const std::vector<std::string>& runs_a,
                       const std::vector<std::string>& runs_b,
                       const std::string& metric, int dof_override,
                       const std::string& out_dir) {
  if (runs_a.size() != runs_b.size() || runs_a.size() < 2)
    throw std::runtime_error(
        "run_report: need two equal-sized run lists with at least 2 runs");

  const std::string path =
      metric.find('.') == std::string::npos ? "model.overall." + metric : metric;
  const auto extract = [&](const std::string& run_dir) {
    const ordered_json metrics =
        ordered_json::parse(read_file(fs::path(run_dir) / "metrics.json"));
    const ordered_json* node = walk_path(metrics, path);
    if (node == nullptr || !node->is_number())
      throw std::runtime_error("run_report: metric '" + path +
                               "' not found in " + run_dir);
    return node->get<double>();
  };

  std::vector<double> a, b;
  for (const auto& dir : runs_a) a.push_back(extract(dir));
  for (const auto& dir : runs_b) b.push_back(extract(dir));
  const TTestResult ttest = paired_ttest(a, b, dof_override);

  double mean_a = 0.0, mean_b = 0.0;
  for (double v : a) mean_a += v;
  for (double v : b) mean_b += v;
  mean_a /= static_cast<double>(a.size());
  mean_b /= static_cast<double>(b.size());

  ordered_json report;
  report["metric"] = path;
  report["pairs"] = a.size();
  report["mean_a"] = mean_a;
  report["mean_b"] = mean_b;
  report["values_a"] = a;
  report["values_b"] = b;
  if (ttest.infinite) {
    report["t"] = "inf";
  } else {
    report["t"] = ttest.t;
  }
  report["p"] = ttest.p;
  report["dof"] = ttest.dof;
  report["zero_variance"] = ttest.infinite;

  const std::string payload = report.dump(2) + "\n";
  if (!out_dir.empty()) write_file(fs::path(out_dir) / "report.json", payload);
  return payload;
}

}  // namespace bicorec
