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

#include "bicorec/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "bicorec/evaluation.hpp"

namespace bicorec {

namespace {

using ad::Matrix;
using ad::Tensor;

void append_double(std::ostringstream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

std::vector<ad::Tensor> trainable(NetworkParameters& params) {
  std::vector<ad::Tensor> out;
  for (auto& [name, tensor] : params.named()) out.push_back(tensor);
  return out;
}

/// Hard argmax pseudo-labels of the given score rows, over real items only,
/// ties to the lowest index. Plain values: no gradient reaches the source.
std::vector<int> pseudo_labels(const ad::Tensor& scores,
                               const std::vector<int>& rows) {
  std::vector<int> labels;
  labels.reserve(rows.size());
  const auto& value = scores.value();
  for (int row : rows) {
    int best = 1;
    for (int v = 2; v < static_cast<int>(value.cols()); ++v)
      if (value(row, v) > value(row, best)) best = v;
    labels.push_back(best);
  }
  return labels;
}

UserSequence repad(const std::vector<int>& items, int max_len, int user_index) {
  UserSequence seq;
  seq.user_index = user_index;
  seq.positions.assign(static_cast<std::size_t>(max_len), 0);
  const int take = std::min<int>(max_len, static_cast<int>(items.size()));
  for (int i = 0; i < take; ++i)
    seq.positions[static_cast<std::size_t>(max_len - take + i)] =
        items[items.size() - static_cast<std::size_t>(take) +
              static_cast<std::size_t>(i)];
  seq.pad_count = max_len - take;
  return seq;
}

constexpr char kDualMagic[8] = {'B', 'C', 'R', 'D', 'U', 'A', 'L', '1'};

void write_string(std::ostream& os, const std::string& s) {
  const std::uint64_t len = s.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string s(static_cast<std::size_t>(len), '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  return s;
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0)
    throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
  if (weight_decay < 0.0)
    throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (max_epochs < 1)
    throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (cross_pseudo && seed1 == seed2)
    throw std::invalid_argument("TrainConfig: the two networks need distinct seeds");
}

TargetLayout build_targets(const UserSequence& seq, int next_item) {
  if (next_item < 1)
    throw std::invalid_argument("build_targets: next_item must be a real item");
  const int n = seq.length();
  TargetLayout layout;
  layout.kinds.resize(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const int target = t + 1 < n ? seq.positions[static_cast<std::size_t>(t + 1)]
                                 : next_item;
    if (target == 0) {
      layout.kinds[static_cast<std::size_t>(t)] = TargetKind::kPad;
      layout.pad_rows.push_back(t);
    } else {
      layout.kinds[static_cast<std::size_t>(t)] = TargetKind::kNext;
      layout.next_rows.push_back(t);
      layout.next_items.push_back(target);
    }
  }
  return layout;
}

ad::Tensor supervised_loss(const ForwardTrace& trace_1,
                           const ForwardTrace* trace_2,
                           const TargetLayout& layout) {
  if (layout.next_rows.empty())
    throw std::invalid_argument("supervised_loss: no supervised positions");
  Tensor loss =
      ad::cross_entropy_rows(trace_1.scores, layout.next_rows, layout.next_items);
  if (trace_2 != nullptr)
    loss = ad::add(loss, ad::cross_entropy_rows(trace_2->scores, layout.next_rows,
                                                layout.next_items));
  return ad::scale(loss, 1.0 / static_cast<double>(layout.next_rows.size()));
}

ad::Tensor consistency_loss(const ForwardTrace& trace_1,
                            const ForwardTrace& trace_2,
                            const TargetLayout& layout) {
  if (layout.pad_rows.empty()) return Tensor::constant(Matrix::Zero(1, 1));
  const auto labels_from_2 = pseudo_labels(trace_2.scores, layout.pad_rows);
  const auto labels_from_1 = pseudo_labels(trace_1.scores, layout.pad_rows);
  Tensor loss =
      ad::cross_entropy_rows(trace_1.scores, layout.pad_rows, labels_from_2);
  loss = ad::add(loss, ad::cross_entropy_rows(trace_2.scores, layout.pad_rows,
                                              labels_from_1));
  return ad::scale(loss, 1.0 / static_cast<double>(layout.pad_rows.size()));
}

ad::Tensor total_loss(const ad::Tensor& supervised, const ad::Tensor& consistency,
                      double lambda) {
  return ad::add(supervised, ad::scale(consistency, lambda));
}

AdamOptimizer::AdamOptimizer(std::vector<ad::Tensor> params, double learning_rate,
                             double weight_decay, double beta1, double beta2,
                             double eps)
    : lr_(learning_rate),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  slots_.reserve(params.size());
  for (auto& p : params) {
    Slot slot;
    slot.param = p;
    slot.m = Matrix::Zero(p.rows(), p.cols());
    slot.v = Matrix::Zero(p.rows(), p.cols());
    slots_.push_back(std::move(slot));
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& slot : slots_) slot.param.clear_grad();
}

double AdamOptimizer::clip_global_norm(double max_norm) {
  double sum_sq = 0.0;
  for (auto& slot : slots_)
    if (slot.param.has_grad()) sum_sq += slot.param.grad().squaredNorm();
  const double norm = std::sqrt(sum_sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& slot : slots_)
      if (slot.param.has_grad()) slot.param.grad() *= scale;
  }
  return norm;
}

void AdamOptimizer::step() {
  for (auto& slot : slots_) {
    if (!slot.param.has_grad()) continue;
    Matrix grad = slot.param.grad();
    if (weight_decay_ != 0.0) grad += weight_decay_ * slot.param.value();
    ++slot.steps;
    slot.m = beta1_ * slot.m + (1.0 - beta1_) * grad;
    slot.v = beta2_ * slot.v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(slot.steps));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(slot.steps));
    const Matrix m_hat = slot.m / bc1;
    const Matrix v_hat = slot.v / bc2;
    slot.param.value().array() -=
        lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

void AdamOptimizer::save(std::ostream& os) const {
  const std::uint64_t count = slots_.size();
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& slot : slots_) {
    os.write(reinterpret_cast<const char*>(&slot.steps), sizeof(slot.steps));
    os.write(reinterpret_cast<const char*>(slot.m.data()),
             static_cast<std::streamsize>(sizeof(double) * slot.m.size()));
    os.write(reinterpret_cast<const char*>(slot.v.data()),
             static_cast<std::streamsize>(sizeof(double) * slot.v.size()));
  }
}

void AdamOptimizer::load(std::istream& is) {
  std::uint64_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != slots_.size())
    throw std::runtime_error("AdamOptimizer::load: slot count mismatch");
  for (auto& slot : slots_) {
    is.read(reinterpret_cast<char*>(&slot.steps), sizeof(slot.steps));
    is.read(reinterpret_cast<char*>(slot.m.data()),
            static_cast<std::streamsize>(sizeof(double) * slot.m.size()));
    is.read(reinterpret_cast<char*>(slot.v.data()),
            static_cast<std::streamsize>(sizeof(double) * slot.v.size()));
  }
  if (!is) throw std::runtime_error("AdamOptimizer::load: truncated state");
}

std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::ostringstream out;
  out << "epoch,step,sup_loss,cons_loss,total_loss,val_ndcg10,lr\n";
  for (const auto& row : rows) {
    out << row.epoch << ',' << row.step << ',';
    append_double(out, row.sup_loss);
    out << ',';
    append_double(out, row.cons_loss);
    out << ',';
    append_double(out, row.total_loss);
    out << ',';
    if (row.has_val) append_double(out, row.val_ndcg10);
    out << ',';
    append_double(out, row.lr);
    out << '\n';
  }
  return out.str();
}

NetworkParameters clone_network(const NetworkParameters& params) {
  std::stringstream buffer;
  save_network(buffer, params);
  return load_network(buffer);
}

namespace {

/// Validation NDCG@10 of the current parameters over the training view.
double validation_ndcg(const SplitView& split, const PopularityModel& popularity,
                       const AuxTable* aux, const NetworkConfig& config,
                       NetworkParameters& net1, NetworkParameters* net2,
                       bool mean_scores) {
  ad::NoGradGuard guard;
  Rng unused(0);
  double total = 0.0;
  for (std::size_t u = 0; u < split.users.size(); ++u) {
    const UserSequence& input = split.users[u].train;
    const Eigen::VectorXd q =
        popularity.sequence_scores(static_cast<int>(u), input);
    const ForwardTrace trace =
        forward(input, q, aux, config, net1, Mode::kEval, unused);
    Eigen::VectorXd scores = score(trace, input);
    if (mean_scores && net2 != nullptr) {
      const ForwardTrace trace2 =
          forward(input, q, aux, config, *net2, Mode::kEval, unused);
      const Eigen::VectorXd scores2 = score(trace2, input);
      scores = 0.5 * (scores + scores2);
    }
    const int rank = rank_target(scores, split.users[u].valid_target);
    if (rank <= 10) total += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
  }
  return total / static_cast<double>(split.users.size());
}

}  // namespace

DualTrainerState train(const SplitView& split, const PopularityModel& popularity,
                       const AuxTable* aux, const NetworkConfig& net_config,
                       const TrainConfig& train_config) {
  net_config.validate();
  train_config.validate();
  if (split.users.empty()) throw std::invalid_argument("train: empty split");

  const int n = split.max_len;
  int item_count = 0;
  for (const auto& su : split.users) {
    for (int v : su.train.positions) item_count = std::max(item_count, v);
    item_count = std::max({item_count, su.valid_target, su.test_target});
  }

  // Training instances: drop the last training item from the input and use
  // it as the supervised target of the final position, so every target stays
  // inside the training view.
  std::vector<UserSequence> inputs;
  std::vector<TargetLayout> layouts;
  std::vector<Eigen::VectorXd> pop_scores;
  inputs.reserve(split.users.size());
  for (std::size_t u = 0; u < split.users.size(); ++u) {
    const auto items = split.users[u].train.real_items();
    if (items.size() < 2)
      throw std::invalid_argument(
          "train: a user has fewer than 2 training items; raise min_user_len");
    const std::vector<int> head(items.begin(), items.end() - 1);
    UserSequence input = repad(head, n, split.users[u].train.user_index);
    layouts.push_back(build_targets(input, items.back()));
    pop_scores.push_back(
        popularity.sequence_scores(static_cast<int>(u), input));
    inputs.push_back(std::move(input));
  }

  const bool dual = train_config.cross_pseudo;
  NetworkParameters net1(net_config, item_count, train_config.seed1);
  std::optional<NetworkParameters> net2;
  if (dual) net2.emplace(net_config, item_count, train_config.seed2);

  AdamOptimizer opt1(trainable(net1), train_config.learning_rate,
                     train_config.weight_decay);
  std::optional<AdamOptimizer> opt2;
  if (dual)
    opt2.emplace(trainable(*net2), train_config.learning_rate,
                 train_config.weight_decay);

  Rng shuffle_rng(train_config.shuffle_seed);
  Rng dropout_rng(train_config.dropout_seed);

  DualTrainerState state{clone_network(net1),
                         dual ? std::optional<NetworkParameters>(clone_network(*net2))
                              : std::nullopt,
                         -1.0,
                         0,
                         0,
                         {},
                         "",
                         "",
                         "",
                         ""};

  std::vector<std::size_t> order(split.users.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::int64_t global_step = 0;
  int since_improvement = 0;
  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    // Fisher-Yates with the named shuffle stream
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_sup = 0.0, epoch_cons = 0.0, epoch_total = 0.0;
    std::int64_t epoch_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(train_config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(train_config.batch_size));
      const double batch_users = static_cast<double>(end - start);

      Tensor sup_sum, cons_sum;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t u = order[i];
        const ForwardTrace trace1 = forward(inputs[u], pop_scores[u], aux,
                                            net_config, net1, Mode::kTrain,
                                            dropout_rng);
        std::optional<ForwardTrace> trace2;
        if (dual)
          trace2 = forward(inputs[u], pop_scores[u], aux, net_config, *net2,
                           Mode::kTrain, dropout_rng);
        const Tensor sup_u = supervised_loss(
            trace1, trace2 ? &*trace2 : nullptr, layouts[u]);
        sup_sum = sup_sum.defined() ? ad::add(sup_sum, sup_u) : sup_u;
        if (dual) {
          const Tensor cons_u = consistency_loss(trace1, *trace2, layouts[u]);
          cons_sum = cons_sum.defined() ? ad::add(cons_sum, cons_u) : cons_u;
        }
      }
      Tensor sup_batch = ad::scale(sup_sum, 1.0 / batch_users);
      Tensor cons_batch = cons_sum.defined()
                              ? ad::scale(cons_sum, 1.0 / batch_users)
                              : Tensor::constant(Matrix::Zero(1, 1));
      Tensor batch_loss = total_loss(sup_batch, cons_batch, train_config.lambda);
      if (!std::isfinite(batch_loss.scalar())) {
        std::ostringstream ss;
        ss << "train: non-finite loss at epoch " << epoch << ", step "
           << global_step;
        throw std::runtime_error(ss.str());
      }

      opt1.zero_grad();
      if (opt2) opt2->zero_grad();
      ad::backward(batch_loss);
      net1.freeze_padding_row();
      if (net2) net2->freeze_padding_row();
      opt1.clip_global_norm(train_config.grad_clip);
      if (opt2) opt2->clip_global_norm(train_config.grad_clip);
      opt1.step();
      if (opt2) opt2->step();
      net1.freeze_padding_row();
      if (net2) net2->freeze_padding_row();

      ++global_step;
      ++epoch_batches;
      TrainLogRow row;
      row.epoch = epoch;
      row.step = global_step;
      row.sup_loss = sup_batch.scalar();
      row.cons_loss = cons_batch.scalar();
      row.total_loss = batch_loss.scalar();
      row.lr = train_config.learning_rate;
      state.log.push_back(row);
      epoch_sup += row.sup_loss;
      epoch_cons += row.cons_loss;
      epoch_total += row.total_loss;
    }

    const double val = validation_ndcg(split, popularity, aux, net_config, net1,
                                       net2 ? &*net2 : nullptr,
                                       train_config.eval_mean_scores);
    TrainLogRow row;
    row.epoch = epoch;
    row.step = global_step;
    row.sup_loss = epoch_sup / static_cast<double>(epoch_batches);
    row.cons_loss = epoch_cons / static_cast<double>(epoch_batches);
    row.total_loss = epoch_total / static_cast<double>(epoch_batches);
    row.val_ndcg10 = val;
    row.has_val = true;
    row.lr = train_config.learning_rate;
    state.log.push_back(row);

    state.epochs_run = epoch;
    if (val > state.best_val_ndcg) {
      state.best_val_ndcg = val;
      state.best_epoch = epoch;
      state.net1 = clone_network(net1);
      if (net2) state.net2 = clone_network(*net2);
      since_improvement = 0;
    } else {
      ++since_improvement;
      if (since_improvement >= train_config.patience) break;
    }
  }

  {
    std::ostringstream adam1;
    opt1.save(adam1);
    state.adam1_state = adam1.str();
    if (opt2) {
      std::ostringstream adam2;
      opt2->save(adam2);
      state.adam2_state = adam2.str();
    }
    state.dropout_rng_state = dropout_rng.state_string();
    state.shuffle_rng_state = shuffle_rng.state_string();
  }
  return state;
}

void save_dual_checkpoint(std::ostream& os, const DualTrainerState& state) {
  os.write(kDualMagic, sizeof(kDualMagic));
  const std::int32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::int32_t dual = state.net2.has_value() ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&dual), sizeof(dual));
  os.write(reinterpret_cast<const char*>(&state.best_val_ndcg),
           sizeof(state.best_val_ndcg));
  os.write(reinterpret_cast<const char*>(&state.best_epoch),
           sizeof(state.best_epoch));
  os.write(reinterpret_cast<const char*>(&state.epochs_run),
           sizeof(state.epochs_run));
  save_network(os, state.net1);
  if (state.net2) save_network(os, *state.net2);
  write_string(os, state.adam1_state);
  write_string(os, state.adam2_state);
  write_string(os, state.dropout_rng_state);
  write_string(os, state.shuffle_rng_state);
  if (!os) throw std::runtime_error("save_dual_checkpoint: write failed");
}

DualTrainerState load_dual_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kDualMagic, 8))
    throw std::runtime_error("load_dual_checkpoint: bad magic");
  std::int32_t version = 0, dual = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != 1)
    throw std::runtime_error("load_dual_checkpoint: unsupported version");
  is.read(reinterpret_cast<char*>(&dual), sizeof(dual));
  double best_val = 0.0;
  int best_epoch = 0, epochs_run = 0;
  is.read(reinterpret_cast<char*>(&best_val), sizeof(best_val));
  is.read(reinterpret_cast<char*>(&best_epoch), sizeof(best_epoch));
  is.read(reinterpret_cast<char*>(&epochs_run), sizeof(epochs_run));
  NetworkParameters net1 = load_network(is);
  std::optional<NetworkParameters> net2;
  if (dual != 0) net2 = load_network(is);
  DualTrainerState state{std::move(net1), std::move(net2), best_val, best_epoch,
                         epochs_run,      {},              "",       "",
                         "",              ""};
  state.adam1_state = read_string(is);
  state.adam2_state = read_string(is);
  state.dropout_rng_state = read_string(is);
  state.shuffle_rng_state = read_string(is);
  if (!is) throw std::runtime_error("load_dual_checkpoint: truncated file");
  return state;
}

}  // namespace bicorec
