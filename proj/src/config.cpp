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

#include "bicorec/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bicorec/rng.hpp"

namespace bicorec {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

FlatConfig FlatConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str(), path);
}

FlatConfig FlatConfig::parse_string(const std::string& text,
                                    const std::string& origin) {
  FlatConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream ss;
      ss << origin << ":" << line_no << ": expected `key = value`";
      throw std::runtime_error(ss.str());
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      std::ostringstream ss;
      ss << origin << ":" << line_no << ": empty key";
      throw std::runtime_error(ss.str());
    }
    config.values_[key] = value;
  }
  return config;
}

void FlatConfig::apply_override(const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override must be key=value: " + key_eq_value);
  values_[trim(key_eq_value.substr(0, eq))] = trim(key_eq_value.substr(eq + 1));
}

bool FlatConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string FlatConfig::get_string(const std::string& key,
                                   const std::string& fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double FlatConfig::get_double(const std::string& key, double fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not a number: '" +
                             it->second + "'");
  }
}

std::int64_t FlatConfig::get_int(const std::string& key, std::int64_t fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not an integer: '" +
                             it->second + "'");
  }
}

bool FlatConfig::get_bool(const std::string& key, bool fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<std::string> FlatConfig::get_list(const std::string& key) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  std::vector<std::string> out;
  if (it == values_.end()) return out;
  std::stringstream ss(it->second);
  std::string field;
  while (std::getline(ss, field, ',')) {
    field = trim(field);
    if (!field.empty()) out.push_back(field);
  }
  return out;
}

void FlatConfig::expect_fully_consumed() const {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : values_)
    if (!consumed_.count(key)) unknown.push_back(key);
  if (!unknown.empty()) {
    std::ostringstream ss;
    ss << "config: unknown key(s):";
    for (const auto& key : unknown) ss << " '" << key << "'";
    throw std::runtime_error(ss.str());
  }
}

std::string FlatConfig::echo() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
  return out.str();
}

namespace {

ExperimentConfig from_flat(FlatConfig flat) {
  ExperimentConfig config;
  config.interactions_path = flat.get_string("data.interactions", "");
  for (const auto& path : flat.get_list("data.aux"))
    config.aux_paths.push_back(path);
  config.max_len = static_cast<int>(flat.get_int("data.max_len", 50));
  config.min_user_len = static_cast<int>(flat.get_int("data.min_user_len", 5));
  config.head_fraction = flat.get_double("data.head_fraction", 0.2);

  NetworkConfig& net = config.net;
  net.embed_dim = static_cast<int>(flat.get_int("net.hidden", 64));
  net.coattn_dim = static_cast<int>(
      flat.get_int("net.coattn", net.embed_dim));  // k defaults to the width
  net.max_len = config.max_len;
  net.layers = static_cast<int>(flat.get_int("net.layers", 2));
  net.heads = static_cast<int>(flat.get_int("net.heads", 1));
  net.temperature = flat.get_double("net.temperature", 1.0);
  net.dropout_hidden = flat.get_double("net.dropout_hidden", 0.5);
  net.dropout_attn = flat.get_double("net.dropout_attn", 0.2);
  net.layer_norm_eps = flat.get_double("net.layer_norm_eps", 1e-12);
  net.use_aux = flat.get_bool("net.use_aux", !config.aux_paths.empty());
  net.use_coattention = flat.get_bool("net.use_coattention", true);
  net.use_popularity_embedding =
      flat.get_bool("net.use_popularity_embedding", true);
  if (net.use_aux && config.aux_paths.empty())
    throw std::runtime_error("config: net.use_aux needs data.aux files");

  TrainConfig& train = config.train;
  train.lambda = flat.get_double("train.lambda", 0.3);
  train.learning_rate = flat.get_double("train.lr", 0.001);
  train.weight_decay = flat.get_double("train.weight_decay", 0.0);
  train.grad_clip = flat.get_double("train.grad_clip", 5.0);
  train.max_epochs = static_cast<int>(flat.get_int("train.max_epochs", 100));
  train.patience = static_cast<int>(flat.get_int("train.patience", 20));
  train.batch_size = static_cast<int>(flat.get_int("train.batch_size", 128));
  train.cross_pseudo = flat.get_bool("train.cross_pseudo", true);
  train.eval_mean_scores = flat.get_bool("eval.mean_scores", false);

  config.seed = static_cast<std::uint64_t>(flat.get_int("run.seed", 42));
  config.threads = static_cast<int>(flat.get_int("run.threads", 1));
  config.metric_ns.clear();
  const auto ns = flat.get_list("eval.metric_n");
  if (ns.empty()) {
    config.metric_ns.push_back(10);
  } else {
    for (const auto& n : ns) config.metric_ns.push_back(std::stoi(n));
  }
  config.window = static_cast<int>(flat.get_int("eval.window", 50));
  config.filter_consumed = flat.get_bool("eval.filter_consumed", false);

  SyntheticSpec& synth = config.synth;
  synth.user_count = static_cast<int>(flat.get_int("synth.users", 1000));
  synth.item_count = static_cast<int>(flat.get_int("synth.items", 200));
  synth.zipf_exponent = flat.get_double("synth.zipf", 1.1);
  synth.drift = flat.get_double("synth.drift", 0.05);
  synth.popular_start_prob = flat.get_double("synth.popular_start", 0.9);
  synth.head_fraction = flat.get_double("synth.head_fraction", 0.2);
  synth.min_len = static_cast<int>(flat.get_int("synth.min_len", 20));
  synth.max_len = static_cast<int>(flat.get_int("synth.max_len", 20));
  synth.aux_dim = static_cast<int>(flat.get_int("synth.aux_dim", 8));
  synth.seed = static_cast<std::uint64_t>(
      flat.get_int("synth.seed", static_cast<std::int64_t>(config.seed)));

  flat.expect_fully_consumed();
  config.seed_streams();
  return config;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(
    const std::string& path, const std::vector<std::string>& overrides) {
  FlatConfig flat = FlatConfig::parse_file(path);
  for (const auto& entry : overrides) flat.apply_override(entry);
  return from_flat(std::move(flat));
}

ExperimentConfig ExperimentConfig::from_string(
    const std::string& text, const std::vector<std::string>& overrides) {
  FlatConfig flat = FlatConfig::parse_string(text);
  for (const auto& entry : overrides) flat.apply_override(entry);
  return from_flat(std::move(flat));
}

void ExperimentConfig::seed_streams() {
  train.seed1 = Rng::substream_seed(seed, "init-1");
  train.seed2 = Rng::substream_seed(seed, "init-2");
  train.shuffle_seed = Rng::substream_seed(seed, "batching");
  train.dropout_seed = Rng::substream_seed(seed, "dropout");
}

std::string ExperimentConfig::echo() const {
  std::ostringstream out;
  out << "data.interactions = " << interactions_path << "\n";
  out << "data.aux = ";
  for (std::size_t i = 0; i < aux_paths.size(); ++i) {
    if (i) out << ",";
    out << aux_paths[i];
  }
  out << "\n";
  out << "data.max_len = " << max_len << "\n";
  out << "data.min_user_len = " << min_user_len << "\n";
  out << "data.head_fraction = " << format_double(head_fraction) << "\n";
  out << "net.hidden = " << net.embed_dim << "\n";
  out << "net.coattn = " << net.coattn_dim << "\n";
  out << "net.layers = " << net.layers << "\n";
  out << "net.heads = " << net.heads << "\n";
  out << "net.temperature = " << format_double(net.temperature) << "\n";
  out << "net.dropout_hidden = " << format_double(net.dropout_hidden) << "\n";
  out << "net.dropout_attn = " << format_double(net.dropout_attn) << "\n";
  out << "net.layer_norm_eps = " << format_double(net.layer_norm_eps) << "\n";
  out << "net.use_aux = " << (net.use_aux ? "true" : "false") << "\n";
  out << "net.use_coattention = " << (net.use_coattention ? "true" : "false")
      << "\n";
  out << "net.use_popularity_embedding = "
      << (net.use_popularity_embedding ? "true" : "false") << "\n";
  out << "train.lambda = " << format_double(train.lambda) << "\n";
  out << "train.lr = " << format_double(train.learning_rate) << "\n";
  out << "train.weight_decay = " << format_double(train.weight_decay) << "\n";
  out << "train.grad_clip = " << format_double(train.grad_clip) << "\n";
  out << "train.max_epochs = " << train.max_epochs << "\n";
  out << "train.patience = " << train.patience << "\n";
  out << "train.batch_size = " << train.batch_size << "\n";
  out << "train.cross_pseudo = " << (train.cross_pseudo ? "true" : "false")
      << "\n";
  out << "eval.mean_scores = " << (train.eval_mean_scores ? "true" : "false")
      << "\n";
  out << "eval.metric_n = ";
  for (std::size_t i = 0; i < metric_ns.size(); ++i) {
    if (i) out << ",";
    out << metric_ns[i];
  }
  out << "\n";
  out << "eval.window = " << window << "\n";
  out << "eval.filter_consumed = " << (filter_consumed ? "true" : "false") << "\n";
  out << "run.seed = " << seed << "\n";
  out << "run.threads = " << threads << "\n";
  out << "synth.users = " << synth.user_count << "\n";
  out << "synth.items = " << synth.item_count << "\n";
  out << "synth.zipf = " << format_double(synth.zipf_exponent) << "\n";
  out << "synth.drift = " << format_double(synth.drift) << "\n";
  out << "synth.popular_start = " << format_double(synth.popular_start_prob)
      << "\n";
  out << "synth.head_fraction = " << format_double(synth.head_fraction) << "\n";
  out << "synth.min_len = " << synth.min_len << "\n";
  out << "synth.max_len = " << synth.max_len << "\n";
  out << "synth.aux_dim = " << synth.aux_dim << "\n";
  out << "synth.seed = " << synth.seed << "\n";
  return out.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
  const std::string text = echo();
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : text) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace bicorec
