// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "liftseg/error.hpp"
#include "liftseg/reference.hpp"

namespace liftseg::reference {

Matrix linear(const Linear& layer, const Matrix& x) {
  require(x.cols() == layer.weight.cols(), ErrorKind::kShape, "linear input width mismatch");
  Matrix y(x.rows(), layer.weight.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.cols(); ++i) acc += layer.weight(o, i) * x(r, i);
      y(r, o) = acc + layer.bias(0, o);
    }
  }
  return y;
}

Matrix mlp(const Mlp2& m, const Matrix& x) {
  Matrix h = linear(m.fc1, x);
  for (std::size_t r = 0; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) h(r, c) = h(r, c) > 0.0 ? h(r, c) : 0.0;
  return linear(m.fc2, h);
}

Matrix adapter(const Matrix& point_features_sp, const ParameterBundle& params) {
  return mlp(params.adapter, point_features_sp);
}

Matrix attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                 const AttentionParams& params, std::size_t heads, AttentionTrace* trace) {
  const std::size_t d = params.query.weight.rows();
  if (heads == 0 || d % heads != 0) fail(ErrorKind::kConfig, "width not divisible by heads");
  require(keys.rows() >= 1, ErrorKind::kShape, "attention needs a key");
  const Matrix q = linear(params.query, queries);
  const Matrix k = linear(params.key, keys);
  const Matrix v = linear(params.value, values);
  const std::size_t hd = d / heads;
  if (trace != nullptr) trace->weights.assign(heads, Matrix(q.rows(), k.rows()));
  Matrix concat(q.rows(), d);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < q.rows(); ++i) {
      std::vector<double> score(k.rows());
      for (std::size_t j = 0; j < k.rows(); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += q(i, h * hd + c) * k(j, h * hd + c);
        score[j] = s / std::sqrt(static_cast<double>(hd));
      }
      const double mx = *std::max_element(score.begin(), score.end());
      double z = 0.0;
      for (double s : score) z += std::exp(s - mx);
      for (std::size_t j = 0; j < k.rows(); ++j) {
        const double a = std::exp(score[j] - mx) / z;
        if (trace != nullptr) trace->weights[h](i, j) = a;
        for (std::size_t c = 0; c < hd; ++c) concat(i, h * hd + c) += a * v(j, h * hd + c);
      }
    }
  }
  return linear(params.output, concat);
}

Matrix intra_modal_fuse(const Matrix& dense_sp, const Matrix& instance_sp,
                        const ParameterBundle& params) {
  require(dense_sp.rows() == instance_sp.rows(), ErrorKind::kShape, "branch row mismatch");
  const Matrix dense = mlp(params.dense_mlp, dense_sp);
  const Matrix inst = mlp(params.instance_mlp, instance_sp);
  const Matrix att = attention(dense, inst, inst, params.intra_attention, params.dims.heads);
  Matrix out(dense.rows(), dense.cols());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = dense(r, c) + att(r, c);
  return out;
}

GateOutput cross_modal_gate(const Matrix& v2d, const Matrix& v3d, const ParameterBundle& params) {
  require(v2d.rows() == v3d.rows() && v2d.cols() == v3d.cols(), ErrorKind::kShape,
          "gate input shape mismatch");
  GateOutput out{Matrix(v2d.rows(), v2d.cols()), {}, {}};
  for (std::size_t r = 0; r < v2d.rows(); ++r) {
    Matrix joint(1, 2 * v2d.cols());
    for (std::size_t c = 0; c < v2d.cols(); ++c) {
      joint(0, c) = v2d(r, c);
      joint(0, v2d.cols() + c) = v3d(r, c);
    }
    const Matrix logits = mlp(params.gate, joint);
    const double a = logits(0, 0);
    const double b = logits(0, 1);
    const double w2 = 1.0 / (1.0 + std::exp(b - a));
    const double w3 = 1.0 / (1.0 + std::exp(a - b));
    out.w2d.push_back(w2);
    out.w3d.push_back(w3);
    for (std::size_t c = 0; c < v2d.cols(); ++c) out.unified(r, c) = w2 * v2d(r, c) + w3 * v3d(r, c);
  }
  return out;
}

QuerySet select_queries(const Matrix& unified, const std::vector<Vec3>& centroids,
                        const TextEmbedding& text, const ParameterBundle& params,
                        std::size_t n_seeds, std::size_t m, RelevancePooling pooling) {
  if (m < 1 || m > n_seeds || n_seeds > unified.rows())
    fail(ErrorKind::kConfig, "need 1 <= m <= n_seeds <= N_S");
  const std::vector<std::size_t> seeds = reference::farthest_point_sampling(centroids, n_seeds, 0);
  const Matrix tokens = linear(params.select_text, text.tokens);
  std::vector<std::tuple<double, std::size_t>> scored;  // (-relevance, superpoint id)
  for (std::size_t sp : seeds) {
    Matrix row(1, unified.cols());
    for (std::size_t c = 0; c < unified.cols(); ++c) row(0, c) = unified(sp, c);
    const Matrix cand = linear(params.select_candidate, row);
    std::vector<double> per_token;
    for (std::size_t t = 0; t < tokens.rows(); ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < tokens.cols(); ++c) s += cand(0, c) * tokens(t, c);
      per_token.push_back(s / std::sqrt(static_cast<double>(params.dims.dim)));
    }
    double rel = 0.0;
    if (pooling == RelevancePooling::kMax) {
      rel = *std::max_element(per_token.begin(), per_token.end());
    } else {
      for (double s : per_token) rel += s;
      rel /= static_cast<double>(per_token.size());
    }
    scored.emplace_back(-rel, sp);
  }
  std::sort(scored.begin(), scored.end());
  QuerySet out{Matrix(m, unified.cols()), {}, {}};
  for (std::size_t i = 0; i < m; ++i) {
    const auto [neg_rel, sp] = scored[i];
    out.source.push_back(sp);
    out.relevance.push_back(-neg_rel);
    for (std::size_t c = 0; c < unified.cols(); ++c) out.embeddings(i, c) = unified(sp, c);
  }
  return out;
}

QuerySet instance_refine(const QuerySet& queries, const Matrix& instance_bank,
                         const ParameterBundle& params) {
  QuerySet out = queries;
  if (instance_bank.rows() == 0) return out;
  const Matrix att = attention(queries.embeddings, instance_bank, instance_bank,
                               params.refine_attention, params.dims.heads);
  for (std::size_t r = 0; r < att.rows(); ++r)
    for (std::size_t c = 0; c < att.cols(); ++c) out.embeddings(r, c) += att(r, c);
  return out;
}

DecodeOutput decode(const QuerySet& queries, const Matrix& unified, const ParameterBundle& params,
                    std::size_t layers) {
  if (layers < 1 || layers > params.decoder.size()) fail(ErrorKind::kConfig, "bad layer count");
  Matrix q = queries.embeddings;
  auto add = [](Matrix& a, const Matrix& b) {
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t c = 0; c < a.cols(); ++c) a(r, c) += b(r, c);
  };
  for (std::size_t l = 0; l < layers; ++l) {
    const DecoderLayerParams& p = params.decoder[l];
    add(q, attention(q, unified, unified, p.cross, params.dims.heads));
    add(q, attention(q, q, q, p.self, params.dims.heads));
    add(q, mlp(p.ffn, q));
  }
  DecodeOutput out{Matrix(q.rows(), unified.rows()), {}};
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t s = 0; s < unified.rows(); ++s) {
      double acc = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) acc += q(i, c) * unified(s, c);
      out.logits(i, s) = acc / std::sqrt(static_cast<double>(params.dims.dim));
    }
    double z = params.confidence.affine.bias(0, 0);
    for (std::size_t c = 0; c < q.cols(); ++c) z += params.confidence.affine.weight(0, c) * q(i, c);
    z += params.confidence.relevance_weight(0, 0) * queries.relevance[i];
    out.confidence.push_back(1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

BinaryMask predict_mask(const DecodeOutput& decoded, const SuperpointPartition& partition,
                        double logit_threshold, double conf_threshold) {
  std::set<std::size_t> active;
  for (std::size_t i = 0; i < decoded.logits.rows(); ++i) {
    if (!(decoded.confidence[i] >= conf_threshold)) continue;
    for (std::size_t s = 0; s < decoded.logits.cols(); ++s)
      if (decoded.logits(i, s) > logit_threshold) active.insert(s);
  }
  BinaryMask sp(partition.count(), 0);
  for (std::size_t s : active) sp[s] = 1;
  return reference::expand_mask(sp, partition);
}

}  // namespace liftseg::reference
