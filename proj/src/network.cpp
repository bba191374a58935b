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

#include "bicorec/network.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace bicorec {

namespace {

using ad::Matrix;
using ad::Tensor;

Matrix init_weight(Rng& rng, int rows, int cols, double stddev = 0.02) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.truncated_normal(stddev);
  return m;
}

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i32(std::ostream& os, std::int32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int32_t read_i32(std::istream& is) {
  std::int32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double read_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

constexpr std::uint32_t kNetworkFormatVersion = 1;
constexpr char kNetworkMagic[8] = {'B', 'C', 'R', 'N', 'E', 'T', '0', '1'};

}  // namespace

void NetworkConfig::validate() const {
  if (embed_dim < 1 || coattn_dim < 1 || max_len < 1 || layers < 1 || heads < 1)
    throw std::invalid_argument("NetworkConfig: dims, layers and heads must be >= 1");
  if (embed_dim % heads != 0)
    throw std::invalid_argument("NetworkConfig: heads must divide embed_dim");
  if (dropout_hidden < 0.0 || dropout_hidden >= 1.0 || dropout_attn < 0.0 ||
      dropout_attn >= 1.0)
    throw std::invalid_argument("NetworkConfig: dropout must be in [0, 1)");
  if (temperature <= 0.0)
    throw std::invalid_argument("NetworkConfig: temperature must be positive");
  if (layer_norm_eps <= 0.0)
    throw std::invalid_argument("NetworkConfig: layer_norm_eps must be positive");
  if (use_aux && aux_dim < 1)
    throw std::invalid_argument("NetworkConfig: use_aux requires aux_dim >= 1");
}

NetworkParameters::NetworkParameters(const NetworkConfig& config, int item_count,
                                     std::uint64_t seed)
    : config_(config), item_count_(item_count), seed_(seed) {
  if (item_count < 1)
    throw std::invalid_argument("NetworkParameters: need at least one item");
  const int d = config.embed_dim;
  const int k = config.coattn_dim;
  Rng rng(seed);

  Matrix items = init_weight(rng, item_count + 1, d);
  items.row(0).setZero();
  item_embedding = Tensor::parameter(std::move(items));
  positional = Tensor::parameter(init_weight(rng, config.max_len, d));
  if (config.use_aux) {
    aux_w = Tensor::parameter(init_weight(rng, config.aux_dim, d));
    aux_b = Tensor::parameter(Matrix::Zero(1, d));
  }
  pop_w = Tensor::parameter(init_weight(rng, 1, d));
  pop_b = Tensor::parameter(Matrix::Zero(1, d));

  layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& layer : layers) {
    layer.query_w = Tensor::parameter(init_weight(rng, d, d));
    layer.query_b = Tensor::parameter(Matrix::Zero(1, d));
    layer.key_w = Tensor::parameter(init_weight(rng, d, d));
    layer.key_b = Tensor::parameter(Matrix::Zero(1, d));
    layer.value_w = Tensor::parameter(init_weight(rng, d, d));
    layer.value_b = Tensor::parameter(Matrix::Zero(1, d));
    layer.out_w = Tensor::parameter(init_weight(rng, d, d));
    layer.out_b = Tensor::parameter(Matrix::Zero(1, d));
    layer.ffn1_w = Tensor::parameter(init_weight(rng, d, d));
    layer.ffn1_b = Tensor::parameter(Matrix::Zero(1, d));
    layer.ffn2_w = Tensor::parameter(init_weight(rng, d, d));
    layer.ffn2_b = Tensor::parameter(Matrix::Zero(1, d));
    layer.norm1_gain = Tensor::parameter(Matrix::Ones(1, d));
    layer.norm1_bias = Tensor::parameter(Matrix::Zero(1, d));
    layer.norm2_gain = Tensor::parameter(Matrix::Ones(1, d));
    layer.norm2_bias = Tensor::parameter(Matrix::Zero(1, d));
  }

  coattn.affinity_w = Tensor::parameter(init_weight(rng, d, d));
  coattn.seq_proj = Tensor::parameter(init_weight(rng, k, d));
  coattn.pop_proj = Tensor::parameter(init_weight(rng, k, d));
  coattn.score_w = Tensor::parameter(init_weight(rng, 1, k));
}

std::vector<std::pair<std::string, ad::Tensor>> NetworkParameters::named() const {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  out.emplace_back("item_embedding", item_embedding);
  out.emplace_back("positional", positional);
  if (aux_w.defined()) {
    out.emplace_back("aux_w", aux_w);
    out.emplace_back("aux_b", aux_b);
  }
  out.emplace_back("pop_w", pop_w);
  out.emplace_back("pop_b", pop_b);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    const Layer& layer = layers[l];
    out.emplace_back(prefix + "query_w", layer.query_w);
    out.emplace_back(prefix + "query_b", layer.query_b);
    out.emplace_back(prefix + "key_w", layer.key_w);
    out.emplace_back(prefix + "key_b", layer.key_b);
    out.emplace_back(prefix + "value_w", layer.value_w);
    out.emplace_back(prefix + "value_b", layer.value_b);
    out.emplace_back(prefix + "out_w", layer.out_w);
    out.emplace_back(prefix + "out_b", layer.out_b);
    out.emplace_back(prefix + "ffn1_w", layer.ffn1_w);
    out.emplace_back(prefix + "ffn1_b", layer.ffn1_b);
    out.emplace_back(prefix + "ffn2_w", layer.ffn2_w);
    out.emplace_back(prefix + "ffn2_b", layer.ffn2_b);
    out.emplace_back(prefix + "norm1_gain", layer.norm1_gain);
    out.emplace_back(prefix + "norm1_bias", layer.norm1_bias);
    out.emplace_back(prefix + "norm2_gain", layer.norm2_gain);
    out.emplace_back(prefix + "norm2_bias", layer.norm2_bias);
  }
  out.emplace_back("coattn.affinity_w", coattn.affinity_w);
  out.emplace_back("coattn.seq_proj", coattn.seq_proj);
  out.emplace_back("coattn.pop_proj", coattn.pop_proj);
  out.emplace_back("coattn.score_w", coattn.score_w);
  return out;
}

void NetworkParameters::freeze_padding_row() {
  item_embedding.value().row(0).setZero();
  if (item_embedding.has_grad()) item_embedding.grad().row(0).setZero();
}

ad::Tensor embed_input(const UserSequence& seq, const AuxTable* aux,
                       const NetworkConfig& config, NetworkParameters& params) {
  if (seq.length() != config.max_len)
    throw std::invalid_argument("embed_input: sequence length != max_len");
  for (int v : seq.positions)
    if (v < 0 || v > params.item_count())
      throw std::out_of_range("embed_input: unknown item index " + std::to_string(v));

  Tensor items = ad::gather_rows(params.item_embedding, seq.positions);
  Tensor embedded = ad::add(items, params.positional);
  if (config.use_aux) {
    if (aux == nullptr)
      throw std::invalid_argument("embed_input: aux table required but missing");
    if (aux->dim() != config.aux_dim)
      throw std::invalid_argument("embed_input: aux dimension mismatch");
    Matrix rows(seq.length(), aux->dim());
    for (int t = 0; t < seq.length(); ++t)
      rows.row(t) = aux->vectors.row(seq.positions[static_cast<std::size_t>(t)]);
    Tensor aux_in = Tensor::constant(std::move(rows));
    Tensor projected = ad::mm(aux_in, params.aux_w);
    // Bias only on real rows: padding must stay purely positional.
    projected = ad::add_row_broadcast(projected, params.aux_b, seq.real_mask());
    embedded = ad::add(embedded, projected);
  }
  return embedded;
}

ad::Tensor embed_popularity(const Eigen::VectorXd& scores,
                            const NetworkConfig& config,
                            NetworkParameters& params) {
  const int n = static_cast<int>(scores.size());
  for (int t = 0; t < n; ++t)
    if (!std::isfinite(scores(t)) || scores(t) < 0.0)
      throw std::invalid_argument("embed_popularity: scores must be finite and >= 0");
  if (!config.use_popularity_embedding) {
    Tensor base = Tensor::constant(Matrix::Zero(n, config.embed_dim));
    return ad::add_row_broadcast(base, params.pop_b);
  }
  Tensor q_col = Tensor::constant(scores);
  Tensor mapped = ad::mm(q_col, params.pop_w);
  return ad::add_row_broadcast(mapped, params.pop_b);
}

ad::Tensor encode(const ad::Tensor& input, const std::vector<char>& real,
                  const NetworkConfig& config, NetworkParameters& params,
                  Mode mode, Rng& dropout_rng,
                  std::vector<ad::Tensor>* hidden_out) {
  const bool train = mode == Mode::kTrain;
  Tensor h = input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    Tensor q = ad::add_row_broadcast(ad::mm(h, layer.query_w), layer.query_b);
    Tensor k = ad::add_row_broadcast(ad::mm(h, layer.key_w), layer.key_b);
    Tensor v = ad::add_row_broadcast(ad::mm(h, layer.value_w), layer.value_b);
    Tensor attended = ad::causal_attention(q, k, v, config.heads, real,
                                           config.dropout_attn, dropout_rng, train);
    attended = ad::add_row_broadcast(ad::mm(attended, layer.out_w), layer.out_b);
    Tensor mid = ad::layer_norm(
        ad::add(h, ad::dropout(attended, config.dropout_hidden, dropout_rng, train)),
        layer.norm1_gain, layer.norm1_bias, config.layer_norm_eps);
    Tensor ffn = ad::add_row_broadcast(
        ad::mm(ad::relu(ad::add_row_broadcast(ad::mm(mid, layer.ffn1_w),
                                              layer.ffn1_b)),
               layer.ffn2_w),
        layer.ffn2_b);
    h = ad::layer_norm(
        ad::add(mid, ad::dropout(ffn, config.dropout_hidden, dropout_rng, train)),
        layer.norm2_gain, layer.norm2_bias, config.layer_norm_eps);
    if (!h.value().allFinite()) {
      std::ostringstream ss;
      ss << "encode: non-finite activation after layer " << l;
      throw std::runtime_error(ss.str());
    }
    if (hidden_out) hidden_out->push_back(h);
  }
  return h;
}

CoAttentionResult coattend(const ad::Tensor& encoded,
                           const ad::Tensor& pop_embedding,
                           const std::vector<char>& real,
                           const NetworkConfig& config,
                           NetworkParameters& params) {
  CoAttentionResult out;
  if (!config.use_coattention) {
    out.weighted = encoded;
    return out;
  }
  int n_real = 0;
  for (char r : real) n_real += r != 0;
  if (n_real == 0)
    throw std::runtime_error("coattend: sequence has no real positions");

  Tensor affinity =
      ad::tanh(ad::mm_bt(ad::mm(encoded, params.coattn.affinity_w), pop_embedding));
  Tensor seq_map = ad::mm_bt(params.coattn.seq_proj, encoded);        // k x n
  Tensor pop_map = ad::mm_bt(params.coattn.pop_proj, pop_embedding);  // k x n
  Tensor attn_map = ad::tanh(ad::add(seq_map, ad::mm(pop_map, affinity)));
  Tensor position_scores = ad::mm(params.coattn.score_w, attn_map);  // 1 x n
  Tensor probs = ad::softmax_masked(position_scores, real);

  // Reweighting: scale each position by its attention probability, restore
  // the activation magnitude with the real-position count, keep a residual.
  Tensor reweighted = ad::scale(ad::row_scale(encoded, probs),
                                config.temperature * static_cast<double>(n_real));
  out.weighted = ad::add(encoded, reweighted);
  out.affinity = affinity;
  out.attn_map = attn_map;
  out.attn_probs = probs;
  return out;
}

ad::Tensor score_all_positions(const ad::Tensor& weighted,
                               NetworkParameters& params) {
  return ad::mm_bt(weighted, params.item_embedding);
}

Eigen::VectorXd score(const ForwardTrace& trace, const UserSequence& seq,
                      int position) {
  const int n = seq.length();
  if (position == -1) position = n;
  if (position < 1 || position > n)
    throw std::out_of_range("score: position out of range");
  if (seq.positions[static_cast<std::size_t>(position - 1)] == 0)
    throw std::invalid_argument("score: position " + std::to_string(position) +
                                " is padding");
  Eigen::VectorXd scores = trace.scores.value().row(position - 1).transpose();
  scores(0) = -std::numeric_limits<double>::infinity();
  return scores;
}

int argmax_item(const Eigen::VectorXd& scores) {
  int best = 1;
  for (int v = 2; v < static_cast<int>(scores.size()); ++v)
    if (scores(v) > scores(best)) best = v;
  return best;
}

ForwardTrace forward(const UserSequence& seq, const Eigen::VectorXd& pop_scores,
                     const AuxTable* aux, const NetworkConfig& config,
                     NetworkParameters& params, Mode mode, Rng& dropout_rng) {
  if (static_cast<int>(pop_scores.size()) != config.max_len)
    throw std::invalid_argument("forward: popularity scores length != max_len");
  const auto real = seq.real_mask();

  ForwardTrace trace;
  trace.input_embedding = embed_input(seq, aux, config, params);
  trace.encoded = encode(trace.input_embedding, real, config, params, mode,
                         dropout_rng, &trace.hidden);
  trace.pop_embedding = embed_popularity(pop_scores, config, params);
  trace.coattn = coattend(trace.encoded, trace.pop_embedding, real, config, params);
  trace.scores = score_all_positions(trace.coattn.weighted, params);
  return trace;
}

void save_network(std::ostream& os, const NetworkParameters& params) {
  os.write(kNetworkMagic, sizeof(kNetworkMagic));
  write_i32(os, static_cast<std::int32_t>(kNetworkFormatVersion));
  const NetworkConfig& c = params.config();
  write_i32(os, c.embed_dim);
  write_i32(os, c.coattn_dim);
  write_i32(os, c.max_len);
  write_i32(os, c.layers);
  write_i32(os, c.heads);
  write_f64(os, c.temperature);
  write_f64(os, c.dropout_hidden);
  write_f64(os, c.dropout_attn);
  write_f64(os, c.layer_norm_eps);
  write_i32(os, c.aux_dim);
  write_i32(os, c.use_aux ? 1 : 0);
  write_i32(os, c.use_coattention ? 1 : 0);
  write_i32(os, c.use_popularity_embedding ? 1 : 0);
  write_i32(os, params.item_count());
  write_u64(os, params.seed());

  const auto blocks = params.named();
  write_i32(os, static_cast<std::int32_t>(blocks.size()));
  for (const auto& [name, tensor] : blocks) {
    write_i32(os, static_cast<std::int32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_i32(os, static_cast<std::int32_t>(tensor.rows()));
    write_i32(os, static_cast<std::int32_t>(tensor.cols()));
    os.write(reinterpret_cast<const char*>(tensor.value().data()),
             static_cast<std::streamsize>(sizeof(double) * tensor.value().size()));
  }
  if (!os) throw std::runtime_error("save_network: write failed");
}

NetworkParameters load_network(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kNetworkMagic, 8))
    throw std::runtime_error("load_network: bad magic");
  const auto version = read_i32(is);
  if (version != static_cast<std::int32_t>(kNetworkFormatVersion))
    throw std::runtime_error("load_network: unsupported version " +
                             std::to_string(version));
  NetworkConfig c;
  c.embed_dim = read_i32(is);
  c.coattn_dim = read_i32(is);
  c.max_len = read_i32(is);
  c.layers = read_i32(is);
  c.heads = read_i32(is);
  c.temperature = read_f64(is);
  c.dropout_hidden = read_f64(is);
  c.dropout_attn = read_f64(is);
  c.layer_norm_eps = read_f64(is);
  c.aux_dim = read_i32(is);
  c.use_aux = read_i32(is) != 0;
  c.use_coattention = read_i32(is) != 0;
  c.use_popularity_embedding = read_i32(is) != 0;
  const int item_count = read_i32(is);
  const std::uint64_t seed = read_u64(is);
  if (!is) throw std::runtime_error("load_network: truncated header");

  NetworkParameters params(c, item_count, seed);
  auto blocks = params.named();
  const auto block_count = read_i32(is);
  if (block_count != static_cast<std::int32_t>(blocks.size()))
    throw std::runtime_error("load_network: block count does not match config");
  for (auto& [name, tensor] : blocks) {
    const auto name_len = read_i32(is);
    std::string stored(static_cast<std::size_t>(name_len), '\0');
    is.read(stored.data(), name_len);
    if (stored != name)
      throw std::runtime_error("load_network: expected block '" + name +
                               "', found '" + stored + "'");
    const auto rows = read_i32(is);
    const auto cols = read_i32(is);
    if (rows != tensor.rows() || cols != tensor.cols())
      throw std::runtime_error("load_network: shape mismatch for block '" + name + "'");
    is.read(reinterpret_cast<char*>(tensor.value().data()),
            static_cast<std::streamsize>(sizeof(double) * tensor.value().size()));
  }
  if (!is) throw std::runtime_error("load_network: truncated blocks");
  return params;
}

}  // namespace bicorec
