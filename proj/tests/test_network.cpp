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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "bicorec/network.hpp"
#include "bicorec/rng.hpp"

using namespace bicorec;
using ad::Matrix;
using ad::Tensor;

namespace {

UserSequence seq_of(std::vector<int> positions) {
  UserSequence s;
  s.positions = std::move(positions);
  s.pad_count = 0;
  for (int v : s.positions) {
    if (v != 0) break;
    ++s.pad_count;
  }
  return s;
}

NetworkConfig tiny_config(int n, int d, int k, int layers = 1) {
  NetworkConfig c;
  c.embed_dim = d;
  c.coattn_dim = k;
  c.max_len = n;
  c.layers = layers;
  c.heads = 1;
  c.dropout_hidden = 0.0;
  c.dropout_attn = 0.0;
  c.layer_norm_eps = 1e-8;
  c.use_aux = false;
  c.aux_dim = 0;
  return c;
}

AuxTable random_aux(Rng& rng, int items, int dim) {
  AuxTable aux;
  aux.vectors = Matrix::Zero(items + 1, dim);
  for (int i = 1; i <= items; ++i)
    for (int j = 0; j < dim; ++j) aux.vectors(i, j) = rng.uniform(-1.0, 1.0);
  return aux;
}

}  // namespace

TEST_CASE("embed_input: padding rows carry only the positional term") {
  NetworkConfig cfg = tiny_config(4, 3, 3);
  NetworkParameters params(cfg, 5, 1);
  const auto seq = seq_of({0, 0, 0, 0});
  const Tensor e = embed_input(seq, nullptr, cfg, params);
  CHECK(e.value() == params.positional.value());
}

TEST_CASE("embed_input sums item, positional and auxiliary parts") {
  Rng rng(3);
  NetworkConfig cfg = tiny_config(3, 4, 2);
  cfg.use_aux = true;
  cfg.aux_dim = 5;
  NetworkParameters params(cfg, 6, 7);
  const AuxTable aux = random_aux(rng, 6, 5);
  const auto seq = seq_of({0, 2, 5});

  const Tensor e = embed_input(seq, &aux, cfg, params);
  for (int t = 0; t < 3; ++t) {
    const int v = seq.positions[static_cast<std::size_t>(t)];
    Eigen::RowVectorXd expect = params.positional.value().row(t);
    expect += params.item_embedding.value().row(v);
    if (v != 0)
      expect += aux.vectors.row(v) * params.aux_w.value() + params.aux_b.value().row(0);
    for (int j = 0; j < 4; ++j)
      CHECK(e.value()(t, j) == doctest::Approx(expect(j)).epsilon(1e-12));
  }

  // ablation: identical model without the aux term
  NetworkConfig no_aux = cfg;
  no_aux.use_aux = false;
  no_aux.aux_dim = 0;
  const Tensor bare = embed_input(seq, nullptr, no_aux, params);
  for (int t = 0; t < 3; ++t) {
    const int v = seq.positions[static_cast<std::size_t>(t)];
    const Eigen::RowVectorXd expect =
        params.item_embedding.value().row(v) + params.positional.value().row(t);
    CHECK((bare.value().row(t) - expect).cwiseAbs().maxCoeff() < 1e-15);
  }

  CHECK_THROWS(embed_input(seq_of({0, 9, 1}), &aux, cfg, params));  // unknown item
}

TEST_CASE("embed_popularity is a per-position affine map of the scalar score") {
  NetworkConfig cfg = tiny_config(4, 4, 2);
  NetworkParameters params(cfg, 5, 11);

  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(4);
  const Tensor at_zero = embed_popularity(zeros, cfg, params);
  for (int t = 0; t < 4; ++t)
    CHECK(at_zero.value().row(t) == params.pop_b.value().row(0));

  Eigen::VectorXd q(4);
  q << 0.3, 1.7, 0.3, 0.0;
  const Tensor e = embed_popularity(q, cfg, params);
  CHECK(e.value().row(0) == e.value().row(2));  // equal scores, equal rows
  for (int t = 0; t < 4; ++t) {
    const Eigen::RowVectorXd expect =
        q(t) * params.pop_w.value().row(0) + params.pop_b.value().row(0);
    for (int j = 0; j < 4; ++j)
      CHECK(e.value()(t, j) == doctest::Approx(expect(j)).epsilon(1e-12));
  }

  Eigen::VectorXd bad(4);
  bad << 0.1, -0.2, 0.0, 0.0;
  CHECK_THROWS(embed_popularity(bad, cfg, params));

  NetworkConfig no_pop = cfg;
  no_pop.use_popularity_embedding = false;
  const Tensor bias_only = embed_popularity(q, no_pop, params);
  for (int t = 0; t < 4; ++t)
    CHECK(bias_only.value().row(t) == params.pop_b.value().row(0));
}

TEST_CASE("encode with an empty stack is the identity") {
  NetworkConfig cfg = tiny_config(3, 4, 2);
  cfg.layers = 1;
  NetworkParameters params(cfg, 5, 13);
  params.layers.clear();  // degenerate L = 0 stack
  Rng rng(1);
  const auto seq = seq_of({0, 1, 2});
  const Tensor e = embed_input(seq, nullptr, cfg, params);
  const Tensor h = encode(e, seq.real_mask(), cfg, params, Mode::kEval, rng);
  CHECK(h.node().get() == e.node().get());
}

TEST_CASE("encode is deterministic in eval mode") {
  NetworkConfig cfg = tiny_config(5, 8, 4, 2);
  cfg.dropout_hidden = 0.5;  // must be ignored in eval mode
  cfg.dropout_attn = 0.3;
  NetworkParameters params(cfg, 9, 17);
  const auto seq = seq_of({0, 3, 1, 4, 2});
  Rng rng_a(1), rng_b(999);
  const Tensor e = embed_input(seq, nullptr, cfg, params);
  const Tensor h1 = encode(e, seq.real_mask(), cfg, params, Mode::kEval, rng_a);
  const Tensor h2 = encode(e, seq.real_mask(), cfg, params, Mode::kEval, rng_b);
  CHECK(h1.value() == h2.value());
}

TEST_CASE("encoder output is causal") {
  Rng rng(23);
  NetworkConfig cfg = tiny_config(6, 8, 4, 2);
  NetworkParameters params(cfg, 12, 29);
  Rng drop(1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> pos(6, 0);
    const int pads = static_cast<int>(rng.uniform_int(4));
    for (int t = pads; t < 6; ++t)
      pos[static_cast<std::size_t>(t)] = 1 + static_cast<int>(rng.uniform_int(12));
    const auto seq = seq_of(pos);
    const Tensor base =
        encode(embed_input(seq, nullptr, cfg, params), seq.real_mask(), cfg,
               params, Mode::kEval, drop);
    for (int t = pads; t < 6; ++t) {
      auto mutated = pos;
      for (int later = t + 1; later < 6; ++later)
        mutated[static_cast<std::size_t>(later)] =
            1 + static_cast<int>(rng.uniform_int(12));
      const auto seq2 = seq_of(mutated);
      const Tensor enc2 =
          encode(embed_input(seq2, nullptr, cfg, params), seq2.real_mask(), cfg,
                 params, Mode::kEval, drop);
      for (int earlier = 0; earlier <= t; ++earlier)
        CHECK(enc2.value().row(earlier) == base.value().row(earlier));
    }
  }
}

TEST_CASE("coattend: single real position takes all attention") {
  NetworkConfig cfg = tiny_config(4, 4, 3);
  cfg.temperature = 0.7;
  NetworkParameters params(cfg, 5, 31);
  const auto seq = seq_of({0, 0, 0, 2});
  Rng drop(1);
  const Tensor h = encode(embed_input(seq, nullptr, cfg, params), seq.real_mask(),
                          cfg, params, Mode::kEval, drop);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(4);
  q(3) = 0.9;
  const Tensor eq = embed_popularity(q, cfg, params);
  const auto out = coattend(h, eq, seq.real_mask(), cfg, params);

  CHECK(out.attn_probs.value()(0, 3) == doctest::Approx(1.0));
  for (int t = 0; t < 3; ++t) CHECK(out.attn_probs.value()(0, t) == 0.0);
  // single real position: weighted row = (1 + tau) * h row
  const Eigen::RowVectorXd expect = (1.0 + cfg.temperature) * h.value().row(3);
  for (int j = 0; j < 4; ++j)
    CHECK(out.weighted.value()(3, j) == doctest::Approx(expect(j)).epsilon(1e-12));
  // padding rows pass through the residual untouched
  for (int t = 0; t < 3; ++t)
    CHECK(out.weighted.value().row(t) == h.value().row(t));
}

TEST_CASE("coattend: constant position scores give uniform attention") {
  NetworkConfig cfg = tiny_config(5, 4, 3);
  NetworkParameters params(cfg, 6, 37);
  params.coattn.seq_proj.value().setZero();  // kills the sequence map term
  const auto seq = seq_of({0, 1, 2, 3, 4});
  Rng drop(1);
  const Tensor h = encode(embed_input(seq, nullptr, cfg, params), seq.real_mask(),
                          cfg, params, Mode::kEval, drop);
  const Tensor eq = Tensor::constant(Matrix::Zero(5, 4));
  const auto out = coattend(h, eq, seq.real_mask(), cfg, params);
  for (int t = 1; t < 5; ++t)
    CHECK(out.attn_probs.value()(0, t) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(out.attn_probs.value()(0, 0) == 0.0);
}

TEST_CASE("coattend matches an explicit loop oracle") {
  Rng rng(41);
  NetworkConfig cfg = tiny_config(3, 4, 2);
  cfg.temperature = 1.3;
  NetworkParameters params(cfg, 5, 43);
  const auto seq = seq_of({0, 2, 4});
  const std::vector<char> real = seq.real_mask();

  Matrix h_val(3, 4), eq_val(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      h_val(i, j) = rng.uniform(-1, 1);
      eq_val(i, j) = rng.uniform(-1, 1);
    }
  const Tensor h = Tensor::constant(h_val);
  const Tensor eq = Tensor::constant(eq_val);
  const auto out = coattend(h, eq, real, cfg, params);

  const Matrix& wa = params.coattn.affinity_w.value();
  const Matrix& wh = params.coattn.seq_proj.value();
  const Matrix& wq = params.coattn.pop_proj.value();
  const Matrix& wc = params.coattn.score_w.value();

  // affinity: tanh(h * wa * eq^T), elementwise loops only
  Matrix affinity(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) acc += h_val(i, a) * wa(a, b) * eq_val(j, b);
      affinity(i, j) = std::tanh(acc);
      CHECK(std::abs(out.affinity.value()(i, j) - affinity(i, j)) <= 1e-9);
      CHECK(std::abs(affinity(i, j)) < 1.0);
    }

  // attention map: tanh(wh h^T + (wq eq^T) affinity)
  Matrix attn_map(2, 3);
  for (int r = 0; r < 2; ++r)
    for (int t = 0; t < 3; ++t) {
      double term1 = 0.0;
      for (int a = 0; a < 4; ++a) term1 += wh(r, a) * h_val(t, a);
      double term2 = 0.0;
      for (int s = 0; s < 3; ++s) {
        double wq_eq = 0.0;
        for (int a = 0; a < 4; ++a) wq_eq += wq(r, a) * eq_val(s, a);
        term2 += wq_eq * affinity(s, t);
      }
      attn_map(r, t) = std::tanh(term1 + term2);
      CHECK(std::abs(out.attn_map.value()(r, t) - attn_map(r, t)) <= 1e-9);
    }

  // probabilities: masked softmax of wc * attn_map
  double z1 = 0.0, z2 = 0.0;
  for (int r = 0; r < 2; ++r) {
    z1 += wc(0, r) * attn_map(r, 1);
    z2 += wc(0, r) * attn_map(r, 2);
  }
  const double m = std::max(z1, z2);
  const double p1 = std::exp(z1 - m) / (std::exp(z1 - m) + std::exp(z2 - m));
  CHECK(std::abs(out.attn_probs.value()(0, 1) - p1) <= 1e-9);
  CHECK(out.attn_probs.value()(0, 0) == 0.0);
  CHECK(std::abs(out.attn_probs.value()(0, 1) + out.attn_probs.value()(0, 2) - 1.0) <=
        1e-12);

  // weighted representation: residual + tau * n_real * alpha_t * h_t
  for (int t = 1; t < 3; ++t) {
    const double alpha = out.attn_probs.value()(0, t);
    for (int j = 0; j < 4; ++j) {
      const double expect = h_val(t, j) + cfg.temperature * 2.0 * alpha * h_val(t, j);
      CHECK(std::abs(out.weighted.value()(t, j) - expect) <= 1e-9);
    }
  }

  // all-padding sequence: softmax support is empty
  CHECK_THROWS(coattend(h, eq, {0, 0, 0}, cfg, params));

  // ablation switch: bypass keeps the encoder states identical
  NetworkConfig off = cfg;
  off.use_coattention = false;
  const auto bypass = coattend(h, eq, real, off, params);
  CHECK(bypass.weighted.node().get() == h.node().get());
}

TEST_CASE("score: orthonormal embeddings recover the matching item") {
  NetworkConfig cfg = tiny_config(3, 4, 2);
  NetworkParameters params(cfg, 4, 47);
  params.item_embedding.value().setZero();
  for (int v = 1; v <= 4; ++v) params.item_embedding.value()(v, v - 1) = 1.0;

  ForwardTrace trace;
  Matrix weighted = Matrix::Zero(3, 4);
  weighted.row(2) = params.item_embedding.value().row(3);
  trace.scores = score_all_positions(Tensor::constant(weighted), params);

  const auto seq = seq_of({0, 1, 2});
  const Eigen::VectorXd scores = score(trace, seq, 3);
  CHECK(argmax_item(scores) == 3);
  CHECK(std::isinf(scores(0)));
  CHECK(scores(0) < 0);

  // zero hidden vector: every real item scores 0, ties resolve to item 1
  Matrix zero_hidden = Matrix::Zero(3, 4);
  ForwardTrace zero_trace;
  zero_trace.scores = score_all_positions(Tensor::constant(zero_hidden), params);
  const Eigen::VectorXd flat = score(zero_trace, seq, 3);
  for (int v = 1; v <= 4; ++v) CHECK(flat(v) == 0.0);
  CHECK(argmax_item(flat) == 1);

  CHECK_THROWS(score(trace, seq, 1));  // padding position
  CHECK_THROWS(score(trace, seq, 9));  // out of range

  // random instance vs dot-product loop oracle
  Rng rng(53);
  Matrix hidden(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) hidden(i, j) = rng.uniform(-1, 1);
  for (int v = 1; v <= 4; ++v)
    for (int j = 0; j < 4; ++j)
      params.item_embedding.value()(v, j) = rng.uniform(-1, 1);
  ForwardTrace rnd;
  rnd.scores = score_all_positions(Tensor::constant(hidden), params);
  const Eigen::VectorXd got = score(rnd, seq, 2);
  for (int v = 1; v <= 4; ++v) {
    double dot = 0.0;
    for (int j = 0; j < 4; ++j)
      dot += hidden(1, j) * params.item_embedding.value()(v, j);
    CHECK(got(v) == doctest::Approx(dot).epsilon(1e-12));
  }
}

TEST_CASE("forward composes the parts and is bit-stable in eval mode") {
  Rng rng(59);
  NetworkConfig cfg = tiny_config(4, 8, 4, 2);
  cfg.use_aux = true;
  cfg.aux_dim = 3;
  NetworkParameters params(cfg, 7, 61);
  const AuxTable aux = random_aux(rng, 7, 3);
  const auto seq = seq_of({0, 3, 5, 2});
  Eigen::VectorXd q(4);
  q << 0.0, 0.4, 0.1, 0.8;

  Rng drop1(1), drop2(2);
  const ForwardTrace a = forward(seq, q, &aux, cfg, params, Mode::kEval, drop1);
  const ForwardTrace b = forward(seq, q, &aux, cfg, params, Mode::kEval, drop2);
  CHECK(a.scores.value() == b.scores.value());
  CHECK(a.coattn.attn_probs.value() == b.coattn.attn_probs.value());

  // compositional oracle: recompute each stage independently
  Rng drop3(3);
  const Tensor e = embed_input(seq, &aux, cfg, params);
  CHECK(e.value() == a.input_embedding.value());
  const Tensor h =
      encode(e, seq.real_mask(), cfg, params, Mode::kEval, drop3);
  CHECK(h.value() == a.encoded.value());
  const Tensor eq = embed_popularity(q, cfg, params);
  CHECK(eq.value() == a.pop_embedding.value());
  const auto co = coattend(h, eq, seq.real_mask(), cfg, params);
  CHECK(co.weighted.value() == a.coattn.weighted.value());
  const Tensor s = score_all_positions(co.weighted, params);
  CHECK(s.value() == a.scores.value());
  CHECK(a.hidden.size() == 2);

  // with every switch off the trace collapses onto the plain encoder
  NetworkConfig plain = cfg;
  plain.use_aux = false;
  plain.aux_dim = 0;
  plain.use_coattention = false;
  plain.use_popularity_embedding = false;
  Rng drop4(4);
  const ForwardTrace p = forward(seq, q, nullptr, plain, params, Mode::kEval, drop4);
  CHECK(p.coattn.weighted.node().get() == p.encoded.node().get());

  // popularity ablation: output does not depend on q at all
  NetworkConfig no_pop = cfg;
  no_pop.use_popularity_embedding = false;
  Eigen::VectorXd q2 = q * 3.0;
  Rng drop5(5), drop6(6);
  const ForwardTrace n1 = forward(seq, q, &aux, no_pop, params, Mode::kEval, drop5);
  const ForwardTrace n2 = forward(seq, q2, &aux, no_pop, params, Mode::kEval, drop6);
  CHECK(n1.scores.value() == n2.scores.value());
}

TEST_CASE("attention probabilities are normalized with zeros at padding") {
  Rng rng(67);
  NetworkConfig cfg = tiny_config(6, 8, 4);
  NetworkParameters params(cfg, 10, 71);
  Rng drop(1);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<int> pos(6, 0);
    const int pads = static_cast<int>(rng.uniform_int(5));
    for (int t = pads; t < 6; ++t)
      pos[static_cast<std::size_t>(t)] = 1 + static_cast<int>(rng.uniform_int(10));
    const auto seq = seq_of(pos);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(6);
    for (int t = pads; t < 6; ++t) q(t) = rng.uniform(0.0, 2.0);
    const ForwardTrace trace =
        forward(seq, q, nullptr, cfg, params, Mode::kEval, drop);

    double sum = 0.0;
    for (int t = 0; t < 6; ++t) {
      const double alpha = trace.coattn.attn_probs.value()(0, t);
      if (t < pads) {
        CHECK(alpha == 0.0);
      } else {
        CHECK(alpha >= 0.0);
        sum += alpha;
      }
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        const double a = trace.coattn.affinity.value()(i, j);
        CHECK(a > -1.0);
        CHECK(a < 1.0);
      }
  }
}

TEST_CASE("analytic gradients through coattend and score match finite differences") {
  Rng rng(73);
  for (int instance = 0; instance < 3; ++instance) {
    NetworkConfig cfg = tiny_config(3, 4, 2);
    NetworkParameters params(cfg, 5, 100 + static_cast<std::uint64_t>(instance));
    const auto seq = seq_of({0, 2, 4});
    const std::vector<char> real = seq.real_mask();

    // O(1) weights so the loss surface is not degenerately flat
    std::vector<Tensor> checked = {params.coattn.affinity_w,
                                   params.coattn.seq_proj,
                                   params.coattn.pop_proj,
                                   params.coattn.score_w,
                                   params.item_embedding};
    for (auto& p : checked)
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j)
          p.value()(i, j) = rng.uniform(-1, 1);
    params.item_embedding.value().row(0).setZero();

    Matrix h_val(3, 4), eq_val(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        h_val(i, j) = rng.uniform(-1, 1);
        eq_val(i, j) = rng.uniform(-1, 1);
      }
    Tensor h = Tensor::parameter(h_val);
    Tensor eq = Tensor::parameter(eq_val);
    checked.push_back(h);
    checked.push_back(eq);

    auto loss_fn = [&]() {
      const auto co = coattend(h, eq, real, cfg, params);
      const Tensor scores = score_all_positions(co.weighted, params);
      return ad::cross_entropy_rows(scores, {2, 1}, {4, 2});
    };

    Tensor loss = loss_fn();
    for (auto& p : checked) p.clear_grad();
    ad::backward(loss);

    const double step = 1e-5;
    for (auto& p : checked) {
      Matrix analytic =
          p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols());
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
          const double orig = p.value()(i, j);
          p.value()(i, j) = orig + step;
          const double up = loss_fn().scalar();
          p.value()(i, j) = orig - step;
          const double down = loss_fn().scalar();
          p.value()(i, j) = orig;
          const double numeric = (up - down) / (2.0 * step);
          CHECK(std::abs(numeric - analytic(i, j)) <=
                1e-8 + 1e-4 * std::max(std::abs(numeric), std::abs(analytic(i, j))));
        }
    }
  }
}

TEST_CASE("full forward pass is differentiable end to end") {
  NetworkConfig cfg = tiny_config(3, 4, 2, 1);
  NetworkParameters params(cfg, 5, 997);
  // O(1) weights: gradient checks on near-zero init are numerically vacuous
  Rng init(5);
  for (auto& [name, tensor] : params.named())
    for (Eigen::Index i = 0; i < tensor.rows(); ++i)
      for (Eigen::Index j = 0; j < tensor.cols(); ++j)
        tensor.value()(i, j) = init.uniform(-0.5, 0.5);
  params.item_embedding.value().row(0).setZero();
  const auto seq = seq_of({0, 1, 3});
  Eigen::VectorXd q(3);
  q << 0.0, 0.5, 1.1;

  auto loss_fn = [&]() {
    Rng drop(1);
    const ForwardTrace trace =
        forward(seq, q, nullptr, cfg, params, Mode::kTrain, drop);
    return ad::cross_entropy_rows(trace.scores, {1, 2}, {3, 2});
  };

  auto blocks = params.named();
  for (auto& [name, tensor] : blocks) tensor.clear_grad();
  ad::backward(loss_fn());

  const double step = 1e-5;
  for (auto& [name, tensor] : blocks) {
    if (!tensor.has_grad()) continue;
    Matrix analytic = tensor.grad();
    // spot-check a handful of coordinates per block
    Rng pick(91);
    for (int reps = 0; reps < 4; ++reps) {
      const auto i = static_cast<Eigen::Index>(pick.uniform_int(
          static_cast<std::uint64_t>(tensor.rows())));
      const auto j = static_cast<Eigen::Index>(pick.uniform_int(
          static_cast<std::uint64_t>(tensor.cols())));
      const double orig = tensor.value()(i, j);
      tensor.value()(i, j) = orig + step;
      const double up = loss_fn().scalar();
      tensor.value()(i, j) = orig - step;
      const double down = loss_fn().scalar();
      tensor.value()(i, j) = orig;
      const double numeric = (up - down) / (2.0 * step);
      INFO("block ", name, " at (", i, ",", j, ")");
      CHECK(std::abs(numeric - analytic(i, j)) <=
            1e-7 + 2e-4 * std::max(std::abs(numeric), std::abs(analytic(i, j))));
    }
  }
}

TEST_CASE("checkpoint round-trips parameters and config") {
  NetworkConfig cfg = tiny_config(5, 6, 3, 2);
  cfg.use_aux = true;
  cfg.aux_dim = 4;
  NetworkParameters params(cfg, 8, 12345);
  params.item_embedding.value()(3, 2) = 0.777;

  std::stringstream buffer;
  save_network(buffer, params);
  NetworkParameters loaded = load_network(buffer);

  CHECK(loaded.config() == cfg);
  CHECK(loaded.item_count() == 8);
  CHECK(loaded.seed() == 12345);
  const auto a = params.named();
  const auto b = loaded.named();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.value() == b[i].second.value());
  }

  std::stringstream garbage("not a checkpoint");
  CHECK_THROWS(load_network(garbage));
}
