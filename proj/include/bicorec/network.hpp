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

#ifndef BICOREC_NETWORK_HPP_
#define BICOREC_NETWORK_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "bicorec/corpus.hpp"
#include "bicorec/tensor.hpp"

namespace bicorec {

enum class Mode { kTrain, kEval };

struct NetworkConfig {
  int embed_dim = 64;   // width of all hidden representations
  int coattn_dim = 64;  // projection width of the co-attention maps
  int max_len = 50;
  int layers = 2;
  int heads = 1;
  double temperature = 1.0;  // scale of the co-attention reweighting
  double dropout_hidden = 0.5;
  double dropout_attn = 0.2;
  double layer_norm_eps = 1e-12;
  int aux_dim = 0;  // auxiliary feature width; 0 when unused
  bool use_aux = true;
  bool use_coattention = true;
  bool use_popularity_embedding = true;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// All learnable state of one network. The item-embedding row 0 belongs to
/// the padding slot and stays exactly zero through training.
class NetworkParameters {
 public:
  NetworkParameters(const NetworkConfig& config, int item_count,
                    std::uint64_t seed);

  struct Layer {
    ad::Tensor query_w, query_b;
    ad::Tensor key_w, key_b;
    ad::Tensor value_w, value_b;
    ad::Tensor out_w, out_b;
    ad::Tensor ffn1_w, ffn1_b;
    ad::Tensor ffn2_w, ffn2_b;
    ad::Tensor norm1_gain, norm1_bias;
    ad::Tensor norm2_gain, norm2_bias;
  };

  struct CoAttention {
    ad::Tensor affinity_w;  // d x d bilinear form between sequence and popularity
    ad::Tensor seq_proj;    // k x d
    ad::Tensor pop_proj;    // k x d
    ad::Tensor score_w;     // 1 x k position scorer
  };

  ad::Tensor item_embedding;  // (item_count + 1) x d
  ad::Tensor positional;      // n x d
  ad::Tensor aux_w, aux_b;    // aux_dim x d, 1 x d (absent when aux unused)
  ad::Tensor pop_w, pop_b;    // 1 x d each: affine map of the scalar score
  std::vector<Layer> layers;
  CoAttention coattn;

  const NetworkConfig& config() const { return config_; }
  int item_count() const { return item_count_; }
  std::uint64_t seed() const { return seed_; }

  /// Stable (name, tensor) listing of every parameter block.
  std::vector<std::pair<std::string, ad::Tensor>> named() const;

  /// Re-zeros the padding row of the item embedding (value and pending grad).
  void freeze_padding_row();

 private:
  NetworkConfig config_;
  int item_count_ = 0;
  std::uint64_t seed_ = 0;
};

struct CoAttentionResult {
  ad::Tensor weighted;   // H after popularity reweighting (n x d)
  ad::Tensor affinity;   // n x n, entries in (-1, 1)
  ad::Tensor attn_map;   // k x n
  ad::Tensor attn_probs; // 1 x n, zero at padding positions
};

/// Everything one forward pass produced, with live graph handles so a loss
/// built on `scores` backpropagates into the parameters.
struct ForwardTrace {
  ad::Tensor input_embedding;      // n x d
  std::vector<ad::Tensor> hidden;  // per layer
  ad::Tensor encoded;              // final encoder state
  ad::Tensor pop_embedding;        // n x d
  CoAttentionResult coattn;
  ad::Tensor scores;               // n x (item_count + 1) logits
};

/// Sum of item, positional and (optionally) projected auxiliary embeddings.
/// Padding rows carry only the positional term.
ad::Tensor embed_input(const UserSequence& seq, const AuxTable* aux,
                       const NetworkConfig& config, NetworkParameters& params);

/// Shared affine map applied to each position's scalar popularity score.
/// With the popularity path disabled every row is just the bias.
ad::Tensor embed_popularity(const Eigen::VectorXd& scores,
                            const NetworkConfig& config,
                            NetworkParameters& params);

/// Stack of causal transformer blocks. Padding positions are masked out of
/// everyone's attention targets (each position keeps a self edge so rows
/// with an all-padding context stay defined). When `hidden_out` is given it
/// receives the state after every block.
ad::Tensor encode(const ad::Tensor& input, const std::vector<char>& real,
                  const NetworkConfig& config, NetworkParameters& params,
                  Mode mode, Rng& dropout_rng,
                  std::vector<ad::Tensor>* hidden_out = nullptr);

/// Parallel co-attention between the sequence states and the popularity
/// embedding. Produces attention probabilities over real positions and the
/// reweighted (residual) sequence representation.
CoAttentionResult coattend(const ad::Tensor& encoded,
                           const ad::Tensor& pop_embedding,
                           const std::vector<char>& real,
                           const NetworkConfig& config,
                           NetworkParameters& params);

/// Logits of every catalog item at every position (inner product with the
/// item embedding table).
ad::Tensor score_all_positions(const ad::Tensor& weighted,
                               NetworkParameters& params);

/// Catalog score vector at one 1-based position (default: the last one).
/// The padding column is set to -inf. Throws on padding positions.
Eigen::VectorXd score(const ForwardTrace& trace, const UserSequence& seq,
                      int position = -1);

/// Highest-scoring real item; ties resolve to the lowest item index.
int argmax_item(const Eigen::VectorXd& scores);

ForwardTrace forward(const UserSequence& seq, const Eigen::VectorXd& pop_scores,
                     const AuxTable* aux, const NetworkConfig& config,
                     NetworkParameters& params, Mode mode, Rng& dropout_rng);

void save_network(std::ostream& os, const NetworkParameters& params);
NetworkParameters load_network(std::istream& is);

}  // namespace bicorec

#endif  // BICOREC_NETWORK_HPP_
