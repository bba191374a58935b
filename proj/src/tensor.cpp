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

#include "bicorec/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace bicorec::ad {

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<Node> make_node(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

bool track(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t->node()->requires_grad) return true;
  }
  return false;
}

void attach(const std::shared_ptr<Node>& n,
            std::initializer_list<const Tensor*> inputs,
            std::function<void(Node&)> fn) {
  n->requires_grad = true;
  n->parents.reserve(inputs.size());
  for (const Tensor* t : inputs) n->parents.push_back(t->node());
  n->backprop = std::move(fn);
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::parameter(Matrix v) {
  auto n = make_node(std::move(v));
  n->requires_grad = true;
  return Tensor(n);
}

Tensor Tensor::constant(Matrix v) { return Tensor(make_node(std::move(v))); }

Tensor mm(const Tensor& a, const Tensor& b) {
  auto n = make_node(a.value() * b.value());
  if (track({&a, &b})) {
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    attach(n, {&a, &b}, [pa, pb](Node& self) {
      if (pa->requires_grad) pa->ensure_grad().noalias() += self.grad * pb->value.transpose();
      if (pb->requires_grad) pb->ensure_grad().noalias() += pa->value.transpose() * self.grad;
    });
  }
  return Tensor(n);
}

Tensor mm_bt(const Tensor& a, const Tensor& b) {
  auto n = make_node(a.value() * b.value().transpose());
  if (track({&a, &b})) {
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    attach(n, {&a, &b}, [pa, pb](Node& self) {
      if (pa->requires_grad) pa->ensure_grad().noalias() += self.grad * pb->value;
      if (pb->requires_grad) pb->ensure_grad().noalias() += self.grad.transpose() * pa->value;
    });
  }
  return Tensor(n);
}

Tensor add(const Tensor& a, const Tensor& b) {
  auto n = make_node(a.value() + b.value());
  if (track({&a, &b})) {
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    attach(n, {&a, &b}, [pa, pb](Node& self) {
      if (pa->requires_grad) pa->ensure_grad() += self.grad;
      if (pb->requires_grad) pb->ensure_grad() += self.grad;
    });
  }
  return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto n = make_node(a.value() - b.value());
  if (track({&a, &b})) {
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    attach(n, {&a, &b}, [pa, pb](Node& self) {
      if (pa->requires_grad) pa->ensure_grad() += self.grad;
      if (pb->requires_grad) pb->ensure_grad() -= self.grad;
    });
  }
  return Tensor(n);
}

Tensor scale(const Tensor& a, double s) {
  auto n = make_node(a.value() * s);
  if (track({&a})) {
    Node* pa = a.node().get();
    attach(n, {&a}, [pa, s](Node& self) {
      pa->ensure_grad() += self.grad * s;
    });
  }
  return Tensor(n);
}

Tensor tanh(const Tensor& a) {
  auto n = make_node(a.value().array().tanh().matrix());
  if (track({&a})) {
    Node* pa = a.node().get();
    attach(n, {&a}, [pa](Node& self) {
      pa->ensure_grad().array() +=
          self.grad.array() * (1.0 - self.value.array().square());
    });
  }
  return Tensor(n);
}

Tensor relu(const Tensor& a) {
  auto n = make_node(a.value().cwiseMax(0.0));
  if (track({&a})) {
    Node* pa = a.node().get();
    attach(n, {&a}, [pa](Node& self) {
      pa->ensure_grad().array() +=
          self.grad.array() * (self.value.array() > 0.0).cast<double>();
    });
  }
  return Tensor(n);
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& row,
                         const std::vector<char>& rows_on) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_row_broadcast: row must be 1 x cols(a)");
  Matrix v = a.value();
  if (rows_on.empty()) {
    v.rowwise() += row.value().row(0);
  } else {
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      if (rows_on[static_cast<std::size_t>(i)]) v.row(i) += row.value().row(0);
  }
  auto n = make_node(std::move(v));
  if (track({&a, &row})) {
    Node* pa = a.node().get();
    Node* pr = row.node().get();
    attach(n, {&a, &row}, [pa, pr, rows_on](Node& self) {
      if (pa->requires_grad) pa->ensure_grad() += self.grad;
      if (pr->requires_grad) {
        Matrix& g = pr->ensure_grad();
        if (rows_on.empty()) {
          g.row(0) += self.grad.colwise().sum();
        } else {
          for (Eigen::Index i = 0; i < self.grad.rows(); ++i)
            if (rows_on[static_cast<std::size_t>(i)]) g.row(0) += self.grad.row(i);
        }
      }
    });
  }
  return Tensor(n);
}

Tensor row_scale(const Tensor& a, const Tensor& coeffs) {
  if (coeffs.rows() != 1 || coeffs.cols() != a.rows())
    throw std::invalid_argument("row_scale: coeffs must be 1 x rows(a)");
  Matrix v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) *= coeffs.value()(0, i);
  auto n = make_node(std::move(v));
  if (track({&a, &coeffs})) {
    Node* pa = a.node().get();
    Node* pc = coeffs.node().get();
    attach(n, {&a, &coeffs}, [pa, pc](Node& self) {
      if (pa->requires_grad) {
        Matrix& g = pa->ensure_grad();
        for (Eigen::Index i = 0; i < self.grad.rows(); ++i)
          g.row(i) += self.grad.row(i) * pc->value(0, i);
      }
      if (pc->requires_grad) {
        Matrix& g = pc->ensure_grad();
        for (Eigen::Index i = 0; i < self.grad.rows(); ++i)
          g(0, i) += self.grad.row(i).dot(pa->value.row(i));
      }
    });
  }
  return Tensor(n);
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps) {
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 ||
      bias.cols() != cols)
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols(a)");
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mu = a.value().row(i).mean();
    const auto centered = a.value().row(i).array() - mu;
    const double var = centered.square().sum() / static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    xhat.row(i) = (centered * is).matrix();
  }
  Matrix v(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    v.row(i) = xhat.row(i).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
  auto n = make_node(std::move(v));
  if (track({&a, &gain, &bias})) {
    Node* pa = a.node().get();
    Node* pg = gain.node().get();
    Node* pb = bias.node().get();
    attach(n, {&a, &gain, &bias},
           [pa, pg, pb, xhat, inv_std, cols](Node& self) {
             if (pb->requires_grad) pb->ensure_grad().row(0) += self.grad.colwise().sum();
             if (pg->requires_grad)
               pg->ensure_grad().row(0) +=
                   (self.grad.array() * xhat.array()).colwise().sum().matrix();
             if (pa->requires_grad) {
               Matrix& g = pa->ensure_grad();
               const double inv_cols = 1.0 / static_cast<double>(cols);
               for (Eigen::Index i = 0; i < self.grad.rows(); ++i) {
                 const auto dxhat =
                     (self.grad.row(i).array() * pg->value.row(0).array());
                 const double m1 = dxhat.sum() * inv_cols;
                 const double m2 =
                     (dxhat * xhat.row(i).array()).sum() * inv_cols;
                 g.row(i) += ((dxhat - m1 - xhat.row(i).array() * m2) * inv_std(i))
                                 .matrix();
               }
             }
           });
  }
  return Tensor(n);
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool train) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = rng.uniform() < p ? 0.0 : keep_scale;
  auto n = make_node(a.value().cwiseProduct(mask));
  if (track({&a})) {
    Node* pa = a.node().get();
    attach(n, {&a}, [pa, mask](Node& self) {
      pa->ensure_grad() += self.grad.cwiseProduct(mask);
    });
  }
  return Tensor(n);
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& idx) {
  Matrix v(static_cast<Eigen::Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.rows())
      throw std::out_of_range("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.value().row(idx[i]);
  }
  auto n = make_node(std::move(v));
  if (track({&table})) {
    Node* pt = table.node().get();
    attach(n, {&table}, [pt, idx](Node& self) {
      Matrix& g = pt->ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i)
        g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    });
  }
  return Tensor(n);
}

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        int heads, const std::vector<char>& real,
                        double attn_dropout, Rng& rng, bool train) {
  const Eigen::Index n_pos = q.rows();
  const Eigen::Index d = q.cols();
  if (heads < 1 || d % heads != 0)
    throw std::invalid_argument("causal_attention: heads must divide the model dim");
  if (static_cast<Eigen::Index>(real.size()) != n_pos)
    throw std::invalid_argument("causal_attention: real-mask size mismatch");
  const Eigen::Index dh = d / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  const bool use_drop = train && attn_dropout > 0.0;
  const double keep_scale = use_drop ? 1.0 / (1.0 - attn_dropout) : 1.0;

  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  std::vector<Matrix> drops;
  if (use_drop) drops.resize(static_cast<std::size_t>(heads));
  Matrix out(n_pos, d);
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.value().middleCols(h * dh, dh);
    const auto kh = k.value().middleCols(h * dh, dh);
    const auto vh = v.value().middleCols(h * dh, dh);
    Matrix logits = (qh * kh.transpose()) * att_scale;
    for (Eigen::Index i = 0; i < n_pos; ++i)
      for (Eigen::Index j = 0; j < n_pos; ++j) {
        const bool allowed =
            j <= i && (real[static_cast<std::size_t>(j)] || j == i);
        if (!allowed) logits(i, j) = neg_inf;
      }
    Matrix& s = probs[static_cast<std::size_t>(h)];
    s.resize(n_pos, n_pos);
    for (Eigen::Index i = 0; i < n_pos; ++i) {
      const double m = logits.row(i).maxCoeff();
      Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
      s.row(i) = (e / e.sum()).matrix();
    }
    Matrix w = s;
    if (use_drop) {
      Matrix& dmask = drops[static_cast<std::size_t>(h)];
      dmask.resize(n_pos, n_pos);
      for (Eigen::Index i = 0; i < n_pos; ++i)
        for (Eigen::Index j = 0; j < n_pos; ++j)
          dmask(i, j) = rng.uniform() < attn_dropout ? 0.0 : keep_scale;
      w = w.cwiseProduct(dmask);
    }
    out.middleCols(h * dh, dh) = w * vh;
  }

  auto node = make_node(std::move(out));
  if (track({&q, &k, &v})) {
    Node* pq = q.node().get();
    Node* pk = k.node().get();
    Node* pv = v.node().get();
    attach(node, {&q, &k, &v},
           [pq, pk, pv, heads, dh, att_scale, probs, drops, use_drop](Node& self) {
             for (int h = 0; h < heads; ++h) {
               const auto qh = pq->value.middleCols(h * dh, dh);
               const auto kh = pk->value.middleCols(h * dh, dh);
               const auto vh = pv->value.middleCols(h * dh, dh);
               const Matrix& s = probs[static_cast<std::size_t>(h)];
               const auto g_out = self.grad.middleCols(h * dh, dh);
               Matrix w = s;
               if (use_drop) w = w.cwiseProduct(drops[static_cast<std::size_t>(h)]);
               if (pv->requires_grad)
                 pv->ensure_grad().middleCols(h * dh, dh).noalias() +=
                     w.transpose() * g_out;
               Matrix g_w = g_out * vh.transpose();
               if (use_drop) g_w = g_w.cwiseProduct(drops[static_cast<std::size_t>(h)]);
               // softmax backward, rowwise
               Matrix g_logits(s.rows(), s.cols());
               for (Eigen::Index i = 0; i < s.rows(); ++i) {
                 const double dot = g_w.row(i).dot(s.row(i));
                 g_logits.row(i) =
                     (s.row(i).array() * (g_w.row(i).array() - dot)).matrix();
               }
               if (pq->requires_grad)
                 pq->ensure_grad().middleCols(h * dh, dh).noalias() +=
                     g_logits * kh * att_scale;
               if (pk->requires_grad)
                 pk->ensure_grad().middleCols(h * dh, dh).noalias() +=
                     g_logits.transpose() * qh * att_scale;
             }
           });
  }
  return Tensor(node);
}

Tensor softmax_masked(const Tensor& logits, const std::vector<char>& keep) {
  if (logits.rows() != 1)
    throw std::invalid_argument("softmax_masked: expects a 1 x n row");
  const Eigen::Index n = logits.cols();
  if (static_cast<Eigen::Index>(keep.size()) != n)
    throw std::invalid_argument("softmax_masked: mask size mismatch");
  double max_v = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j)
    if (keep[static_cast<std::size_t>(j)]) max_v = std::max(max_v, logits.value()(0, j));
  if (!std::isfinite(max_v))
    throw std::runtime_error("softmax_masked: softmax over empty support");
  Matrix p = Matrix::Zero(1, n);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!keep[static_cast<std::size_t>(j)]) continue;
    const double e = std::exp(logits.value()(0, j) - max_v);
    p(0, j) = e;
    sum += e;
  }
  p /= sum;
  auto node = make_node(std::move(p));
  if (track({&logits})) {
    Node* pl = logits.node().get();
    attach(node, {&logits}, [pl, keep](Node& self) {
      const auto& p_row = self.value;
      double dot = 0.0;
      for (Eigen::Index j = 0; j < p_row.cols(); ++j)
        dot += self.grad(0, j) * p_row(0, j);
      Matrix& g = pl->ensure_grad();
      for (Eigen::Index j = 0; j < p_row.cols(); ++j)
        if (keep[static_cast<std::size_t>(j)])
          g(0, j) += p_row(0, j) * (self.grad(0, j) - dot);
    });
  }
  return Tensor(node);
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& rows,
                          const std::vector<int>& targets) {
  if (rows.size() != targets.size())
    throw std::invalid_argument("cross_entropy_rows: rows/targets size mismatch");
  if (rows.empty())
    throw std::invalid_argument("cross_entropy_rows: no rows selected");
  const Eigen::Index n_items = logits.cols() - 1;  // column 0 is padding
  if (n_items < 1) throw std::invalid_argument("cross_entropy_rows: no items");
  Matrix softmaxes(static_cast<Eigen::Index>(rows.size()), n_items);
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    const int y = targets[i];
    if (r < 0 || r >= logits.rows())
      throw std::out_of_range("cross_entropy_rows: row out of range");
    if (y < 1 || y > n_items)
      throw std::out_of_range("cross_entropy_rows: target must be a real item");
    const auto z = logits.value().row(r).segment(1, n_items);
    const double m = z.maxCoeff();
    Eigen::ArrayXd e = (z.array() - m).exp();
    const double denom = e.sum();
    softmaxes.row(static_cast<Eigen::Index>(i)) = (e / denom).matrix();
    total += m + std::log(denom) - z(y - 1);
  }
  auto node = make_node(Matrix::Constant(1, 1, total));
  if (track({&logits})) {
    Node* pl = logits.node().get();
    attach(node, {&logits}, [pl, rows, targets, softmaxes, n_items](Node& self) {
      const double g = self.grad(0, 0);
      Matrix& gl = pl->ensure_grad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        gl.row(rows[i]).segment(1, n_items) +=
            g * softmaxes.row(static_cast<Eigen::Index>(i));
        gl(rows[i], targets[i]) -= g;
      }
    });
  }
  return Tensor(node);
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1");
  if (!loss.node()->requires_grad)
    throw std::invalid_argument("backward: loss does not require grad");

  // Iterative post-order DFS; the reversed order is a valid topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Node* parent = node->parents[next_child++].get();
      if (parent->requires_grad && visited.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && node->grad.size() != 0) node->backprop(*node);
  }
}

}  // namespace bicorec::ad
