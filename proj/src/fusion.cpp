// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "liftseg/error.hpp"

namespace liftseg {

namespace {

Linear make_linear(std::size_t in, std::size_t out) { return {Matrix(out, in), Matrix(1, out)}; }
Mlp2 make_mlp(std::size_t in, std::size_t hidden, std::size_t out) {
  return {make_linear(in, hidden), make_linear(hidden, out)};
}
AttentionParams make_attention(std::size_t d) {
  return {make_linear(d, d), make_linear(d, d), make_linear(d, d), make_linear(d, d)};
}

template <class Bundle, class Fn>
void visit(Bundle& b, Fn&& fn) {
  auto linear = [&](const std::string& name, auto& l) {
    fn(name + ".weight", l.weight);
    fn(name + ".bias", l.bias);
  };
  auto mlp = [&](const std::string& name, auto& m) {
    linear(name + ".fc1", m.fc1);
    linear(name + ".fc2", m.fc2);
  };
  auto attention = [&](const std::string& name, auto& a) {
    linear(name + ".query", a.query);
    linear(name + ".key", a.key);
    linear(name + ".value", a.value);
    linear(name + ".output", a.output);
  };
  mlp("adapter", b.adapter);
  mlp("intra.dense_mlp", b.dense_mlp);
  mlp("intra.instance_mlp", b.instance_mlp);
  attention("intra.attention", b.intra_attention);
  mlp("gate", b.gate);
  linear("select.candidate", b.select_candidate);
  linear("select.text", b.select_text);
  attention("refine.attention", b.refine_attention);
  for (std::size_t l = 0; l < b.decoder.size(); ++l) {
    const std::string prefix = "decoder." + std::to_string(l);
    attention(prefix + ".cross", b.decoder[l].cross);
    attention(prefix + ".self", b.decoder[l].self);
    mlp(prefix + ".ffn", b.decoder[l].ffn);
  }
  linear("confidence", b.confidence.affine);
  fn("confidence.relevance_weight", b.confidence.relevance_weight);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void check_cols(const Matrix& x, std::size_t expected, const char* what) {
  require(x.cols() == expected, ErrorKind::kShape,
          std::string(what) + ": expected width " + std::to_string(expected) + ", got " +
              std::to_string(x.cols()));
}

}  // namespace

ParameterBundle ParameterBundle::zeros(const FusionDims& dims) {
  require(dims.dim >= 1 && dims.point_dim >= 1 && dims.heads >= 1 && dims.layers >= 1,
          ErrorKind::kConfig, "fusion dims must be positive");
  require(dims.dim % dims.heads == 0, ErrorKind::kConfig,
          "embedding width " + std::to_string(dims.dim) + " is not divisible by " +
              std::to_string(dims.heads) + " heads");
  const std::size_t d = dims.dim;
  ParameterBundle b;
  b.dims = dims;
  b.adapter = make_mlp(dims.point_dim, d, d);
  b.dense_mlp = make_mlp(d, d, d);
  b.instance_mlp = make_mlp(d, d, d);
  b.intra_attention = make_attention(d);
  b.gate = make_mlp(2 * d, d, 2);
  b.select_candidate = make_linear(d, d);
  b.select_text = make_linear(d, d);
  b.refine_attention = make_attention(d);
  b.decoder.resize(dims.layers);
  for (auto& layer : b.decoder) {
    layer.cross = make_attention(d);
    layer.self = make_attention(d);
    layer.ffn = make_mlp(d, d, d);
  }
  b.confidence.affine = make_linear(d, 1);
  b.confidence.relevance_weight = Matrix(1, 1);
  return b;
}

ParameterBundle ParameterBundle::initialize(const FusionDims& dims, std::uint64_t seed) {
  ParameterBundle b = zeros(dims);
  b.rng_seed = seed;
  std::mt19937_64 rng(seed);
  // Explicit 53-bit conversion keeps values identical across standard libraries.
  auto uniform01 = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  b.for_each([&](const std::string& name, Matrix& m) {
    if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0) return;
    const double fan_in = static_cast<double>(m.cols());
    const double fan_out = static_cast<double>(m.rows());
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : m.data())
      v = static_cast<double>(static_cast<float>((2.0 * uniform01() - 1.0) * a));
  });
  return b;
}

void ParameterBundle::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  visit(*this, fn);
}

void ParameterBundle::for_each(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  visit(*this, fn);
}

void ParameterBundle::validate() const {
  require(dims.dim % dims.heads == 0, ErrorKind::kConfig, "embedding width not divisible by heads");
  require(decoder.size() == dims.layers, ErrorKind::kShape, "decoder layer count differs from dims");
  const ParameterBundle reference = zeros(dims);
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  reference.for_each([&](const std::string&, const Matrix& m) {
    shapes.emplace_back(m.rows(), m.cols());
  });
  std::size_t i = 0;
  for_each([&](const std::string& name, const Matrix& m) {
    require(i < shapes.size(), ErrorKind::kShape, "unexpected tensor " + name);
    require(m.rows() == shapes[i].first && m.cols() == shapes[i].second, ErrorKind::kShape,
            "tensor " + name + " has shape " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + ", expected " + std::to_string(shapes[i].first) + "x" +
                std::to_string(shapes[i].second));
    require(m.all_finite(), ErrorKind::kValidation, "tensor " + name + " is not finite");
    ++i;
  });
}

Matrix apply(const Linear& layer, const Matrix& x) {
  check_cols(x, layer.weight.cols(), "linear input");
  const std::size_t out_dim = layer.weight.rows();
  Matrix y(x.rows(), out_dim);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(x.rows()); ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const auto in = x.row(r);
    auto out = y.row(r);
    for (std::size_t o = 0; o < out_dim; ++o) out[o] = dot(layer.weight.row(o), in) + layer.bias(0, o);
  }
  return y;
}

Matrix apply(const Mlp2& mlp, const Matrix& x) {
  Matrix hidden = apply(mlp.fc1, x);
  for (double& v : hidden.data()) v = std::max(v, 0.0);
  return apply(mlp.fc2, hidden);
}

Matrix adapter(const Matrix& point_features_sp, const ParameterBundle& params) {
  check_cols(point_features_sp, params.dims.point_dim, "adapter input");
  return apply(params.adapter, point_features_sp);
}

Matrix multi_head_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                            const AttentionParams& params, std::size_t heads,
                            AttentionTrace* trace) {
  const std::size_t d = params.query.weight.rows();
  require(heads >= 1 && d % heads == 0, ErrorKind::kConfig,
          "width " + std::to_string(d) + " is not divisible by " + std::to_string(heads) +
              " heads");
  require(keys.rows() >= 1, ErrorKind::kShape, "attention needs at least one key");
  require(keys.rows() == values.rows(), ErrorKind::kShape, "keys and values differ in count");

  const Matrix q = apply(params.query, queries);
  const Matrix k = apply(params.key, keys);
  const Matrix v = apply(params.value, values);
  const std::size_t n_q = q.rows();
  const std::size_t n_k = k.rows();
  const std::size_t head_dim = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  if (trace != nullptr) trace->weights.assign(heads, Matrix(n_q, n_k));
  Matrix mixed(n_q, d);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n_q); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    std::vector<double> weights(n_k);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * head_dim;
      const auto qi = q.row(i).subspan(off, head_dim);
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n_k; ++j) {
        weights[j] = dot(qi, k.row(j).subspan(off, head_dim)) * scale;
        peak = std::max(peak, weights[j]);
      }
      double total = 0.0;
      for (double& w : weights) {
        w = std::exp(w - peak);
        total += w;
      }
      for (double& w : weights) w /= total;
      auto out = mixed.row(i).subspan(off, head_dim);
      for (std::size_t j = 0; j < n_k; ++j) {
        const auto vj = v.row(j).subspan(off, head_dim);
        for (std::size_t c = 0; c < head_dim; ++c) out[c] += weights[j] * vj[c];
      }
      if (trace != nullptr) {
        auto row = trace->weights[h].row(i);
        std::copy(weights.begin(), weights.end(), row.begin());
      }
    }
  }
  return apply(params.output, mixed);
}

Matrix intra_modal_fuse(const Matrix& dense_sp, const Matrix& instance_sp,
                        const ParameterBundle& params) {
  require(dense_sp.rows() == instance_sp.rows(), ErrorKind::kShape,
          "dense and instance branches differ in superpoint count");
  check_cols(dense_sp, params.dims.dim, "dense branch");
  check_cols(instance_sp, params.dims.dim, "instance branch");
  Matrix fused = apply(params.dense_mlp, dense_sp);
  const Matrix inst = apply(params.instance_mlp, instance_sp);
  const Matrix attended =
      multi_head_attention(fused, inst, inst, params.intra_attention, params.dims.heads);
  for (std::size_t i = 0; i < fused.size(); ++i) fused.data()[i] += attended.data()[i];
  return fused;
}

GateOutput cross_modal_gate(const Matrix& v2d, const Matrix& v3d, const ParameterBundle& params) {
  require(v2d.rows() == v3d.rows() && v2d.cols() == v3d.cols(), ErrorKind::kShape,
          "gate inputs differ in shape");
  check_cols(v2d, params.dims.dim, "gate input");
  const std::size_t n = v2d.rows();
  const std::size_t d = v2d.cols();
  Matrix joint(n, 2 * d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = joint.row(i);
    std::copy(v2d.row(i).begin(), v2d.row(i).end(), row.begin());
    std::copy(v3d.row(i).begin(), v3d.row(i).end(), row.begin() + static_cast<std::ptrdiff_t>(d));
  }
  const Matrix logits = apply(params.gate, joint);

  GateOutput out{Matrix(n, d), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double peak = std::max(logits(i, 0), logits(i, 1));
    const double e2 = std::exp(logits(i, 0) - peak);
    const double e3 = std::exp(logits(i, 1) - peak);
    out.w2d[i] = e2 / (e2 + e3);
    out.w3d[i] = e3 / (e2 + e3);
    auto row = out.unified.row(i);
    for (std::size_t c = 0; c < d; ++c) row[c] = out.w2d[i] * v2d(i, c) + out.w3d[i] * v3d(i, c);
  }
  return out;
}

QuerySet select_queries(const Matrix& unified, const std::vector<Vec3>& centroids,
                        const TextEmbedding& text, const ParameterBundle& params,
                        std::size_t n_seeds, std::size_t m, RelevancePooling pooling) {
  const std::size_t n_s = unified.rows();
  require(centroids.size() == n_s, ErrorKind::kShape, "centroid count differs from superpoints");
  require(m >= 1 && m <= n_seeds, ErrorKind::kConfig,
          "need 1 <= m <= n_seeds (m=" + std::to_string(m) + ", n_seeds=" +
              std::to_string(n_seeds) + ")");
  require(n_seeds <= n_s, ErrorKind::kConfig,
          "n_seeds " + std::to_string(n_seeds) + " exceeds superpoint count " + std::to_string(n_s));
  require(text.tokens.rows() >= 1, ErrorKind::kShape, "text embedding has no tokens");
  check_cols(text.tokens, params.dims.dim, "text tokens");

  const std::vector<std::size_t> seeds = farthest_point_sampling(centroids, n_seeds, 0);
  Matrix candidates(n_seeds, unified.cols());
  for (std::size_t i = 0; i < n_seeds; ++i) {
    const auto src = unified.row(seeds[i]);
    std::copy(src.begin(), src.end(), candidates.row(i).begin());
  }
  const Matrix cand = apply(params.select_candidate, candidates);
  const Matrix tok = apply(params.select_text, text.tokens);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.dims.dim));

  std::vector<double> relevance(n_seeds);
  for (std::size_t i = 0; i < n_seeds; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t t = 0; t < tok.rows(); ++t) {
      const double s = dot(cand.row(i), tok.row(t)) * scale;
      best = std::max(best, s);
      sum += s;
    }
    relevance[i] = pooling == RelevancePooling::kMax ? best : sum / static_cast<double>(tok.rows());
  }

  std::vector<std::size_t> order(n_seeds);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (relevance[a] != relevance[b]) return relevance[a] > relevance[b];
    return seeds[a] < seeds[b];
  });

  QuerySet out{Matrix(m, unified.cols()), std::vector<std::size_t>(m), std::vector<double>(m)};
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t c = order[i];
    out.source[i] = seeds[c];
    out.relevance[i] = relevance[c];
    const auto src = candidates.row(c);
    std::copy(src.begin(), src.end(), out.embeddings.row(i).begin());
  }
  return out;
}

QuerySet instance_refine(const QuerySet& queries, const Matrix& instance_bank,
                         const ParameterBundle& params) {
  if (instance_bank.rows() == 0) return queries;
  check_cols(instance_bank, params.dims.dim, "instance bank");
  QuerySet out = queries;
  const Matrix attended = multi_head_attention(queries.embeddings, instance_bank, instance_bank,
                                               params.refine_attention, params.dims.heads);
  for (std::size_t i = 0; i < attended.size(); ++i) out.embeddings.data()[i] += attended.data()[i];
  return out;
}

DecodeOutput decode(const QuerySet& queries, const Matrix& unified, const ParameterBundle& params,
                    std::size_t layers) {
  require(layers >= 1, ErrorKind::kConfig, "decoder needs at least one layer");
  require(layers <= params.decoder.size(), ErrorKind::kConfig,
          "requested " + std::to_string(layers) + " decoder layers but parameters hold " +
              std::to_string(params.decoder.size()));
  require(queries.relevance.size() == queries.embeddings.rows(), ErrorKind::kShape,
          "query relevance length differs from query count");
  check_cols(unified, params.dims.dim, "superpoint features");
  const std::size_t heads = params.dims.heads;

  Matrix q = queries.embeddings;
  auto add_into = [](Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
  };
  for (std::size_t l = 0; l < layers; ++l) {
    const DecoderLayerParams& layer = params.decoder[l];
    add_into(q, multi_head_attention(q, unified, unified, layer.cross, heads));
    add_into(q, multi_head_attention(q, q, q, layer.self, heads));
    add_into(q, apply(layer.ffn, q));
  }

  const std::size_t m = q.rows();
  const std::size_t n_s = unified.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.dims.dim));
  DecodeOutput out{Matrix(m, n_s), std::vector<double>(m)};
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t s = 0; s < n_s; ++s) out.logits(i, s) = dot(q.row(i), unified.row(s)) * scale;
  }
  const Matrix head = apply(params.confidence.affine, q);
  for (std::size_t i = 0; i < m; ++i)
    out.confidence[i] =
        sigmoid(head(i, 0) + params.confidence.relevance_weight(0, 0) * queries.relevance[i]);
  return out;
}

BinaryMask predict_mask(const DecodeOutput& decoded, const SuperpointPartition& partition,
                        double logit_threshold, double conf_threshold) {
  require(std::isfinite(logit_threshold) && std::isfinite(conf_threshold), ErrorKind::kConfig,
          "mask thresholds must be finite");
  require(decoded.logits.cols() == partition.count(), ErrorKind::kShape,
          "logit width differs from superpoint count");
  require(decoded.confidence.size() == decoded.logits.rows(), ErrorKind::kShape,
          "confidence length differs from query count");
  BinaryMask sp(partition.count(), 0);
  for (std::size_t i = 0; i < decoded.logits.rows(); ++i) {
    if (decoded.confidence[i] < conf_threshold) continue;
    for (std::size_t s = 0; s < partition.count(); ++s)
      if (decoded.logits(i, s) > logit_threshold) sp[s] = 1;
  }
  return expand_mask(sp, partition);
}

}  // namespace liftseg
