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

#ifndef BICOREC_TENSOR_HPP_
#define BICOREC_TENSOR_HPP_

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "bicorec/rng.hpp"

namespace bicorec::ad {

using Matrix = Eigen::MatrixXd;

/// One node of a dynamically built computation graph. Nodes own their value;
/// gradients are accumulated lazily during the backward pass.
struct Node {
  Matrix value;
  Matrix grad;  // empty until the backward pass touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Distributes this node's gradient into its parents. Empty for leaves.
  std::function<void(Node&)> backprop;

  Matrix& ensure_grad() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

/// Value-semantics handle to a graph node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// Trainable leaf.
  static Tensor parameter(Matrix v);
  /// Non-trainable leaf (inputs, masks, frozen tables).
  static Tensor constant(Matrix v);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& value() { return node_->value; }
  Matrix& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() {
    if (node_->grad.size() != 0) node_->grad.setZero();
  }
  void clear_grad() { node_->grad.resize(0, 0); }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// While a NoGradGuard is alive, ops produce value-only nodes with no
/// recorded backward closures (used for evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---- primitive ops -------------------------------------------------------

Tensor mm(const Tensor& a, const Tensor& b);     // a * b
Tensor mm_bt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);

/// a + 1*row, where row is 1 x cols. If `rows_on` is non-empty, the bias is
/// added only on the flagged rows.
Tensor add_row_broadcast(const Tensor& a, const Tensor& row,
                         const std::vector<char>& rows_on = {});

/// Multiplies row i of `a` by coeffs(0, i); coeffs is 1 x rows(a).
Tensor row_scale(const Tensor& a, const Tensor& coeffs);

/// Row-wise layer normalization with learned gain/bias (both 1 x cols).
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps);

/// Inverted dropout. Identity when `train` is false or p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng, bool train);

/// Selects rows of `table` by index (rows may repeat). Backward scatter-adds.
Tensor gather_rows(const Tensor& table, const std::vector<int>& idx);

/// Single-sequence causal self-attention over q, k, v (each n x d) with
/// `heads` heads. Position i may attend to position j iff j <= i and
/// (real[j] or j == i); the self edge keeps rows with an all-padding
/// causal context well defined. Attention probabilities get inverted
/// dropout with rate `attn_dropout` in train mode.
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        int heads, const std::vector<char>& real,
                        double attn_dropout, Rng& rng, bool train);

/// Softmax over the entries of a 1 x n row restricted to `keep`; dropped
/// entries get probability exactly 0. Throws if no entry is kept.
Tensor softmax_masked(const Tensor& logits, const std::vector<char>& keep);

/// Sum over the selected rows of the cross entropy between row softmax and
/// the target column. Column 0 (the padding item) is excluded from the
/// support. `targets[i]` is the target column for row `rows[i]`.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& rows,
                          const std::vector<int>& targets);

/// Reverse-mode sweep from a 1x1 loss node.
void backward(const Tensor& loss);

}  // namespace bicorec::ad

#endif  // BICOREC_TENSOR_HPP_
