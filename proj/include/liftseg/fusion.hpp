// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_FUSION_HPP
#define LIFTSEG_FUSION_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "liftseg/geometry.hpp"
#include "liftseg/superpoint.hpp"
#include "liftseg/tensor.hpp"

namespace liftseg {

struct FusionDims {
  std::size_t point_dim = 256;  // C, width of the 3D backbone features
  std::size_t dim = 256;        // D, shared embedding width
  std::size_t heads = 8;
  std::size_t layers = 6;

  friend bool operator==(const FusionDims&, const FusionDims&) = default;
};

/// Affine map y = W x + b with W stored out x in and b as 1 x out.
struct Linear {
  Matrix weight;
  Matrix bias;
};

/// fc2(relu(fc1(x)))
struct Mlp2 {
  Linear fc1;
  Linear fc2;
};

struct AttentionParams {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
};

struct DecoderLayerParams {
  AttentionParams cross;
  AttentionParams self;
  Mlp2 ffn;
};

/// Logistic head over the final query embedding. `relevance_weight` scales
/// the query's text relevance score, which is added to the logit.
struct ConfidenceHead {
  Linear affine;  // 1 x D
  Matrix relevance_weight{1, 1};
};

/// Every learnable tensor of the fusion stack.
struct ParameterBundle {
  FusionDims dims;
  std::uint64_t rng_seed = 0;

  Mlp2 adapter;
  Mlp2 dense_mlp;
  Mlp2 instance_mlp;
  AttentionParams intra_attention;
  Mlp2 gate;
  Linear select_candidate;
  Linear select_text;
  AttentionParams refine_attention;
  std::vector<DecoderLayerParams> decoder;
  ConfidenceHead confidence;

  /// Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)); biases zero. Values are
  /// rounded to float so the tensor archive round-trips exactly.
  static ParameterBundle initialize(const FusionDims& dims, std::uint64_t seed);
  /// All tensors zero, shaped for `dims`.
  static ParameterBundle zeros(const FusionDims& dims);

  /// Visits (name, tensor) in a fixed order. Biases are exposed as 1 x n.
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  /// Throws kShape when a tensor disagrees with `dims`, kValidation on
  /// non-finite values.
  void validate() const;
};

struct TextEmbedding {
  Matrix tokens;  // N_T x D
};

struct QuerySet {
  Matrix embeddings;                // m x D
  std::vector<std::size_t> source;  // superpoint id of each query
  std::vector<double> relevance;    // non-increasing
};

struct AttentionTrace {
  std::vector<Matrix> weights;  // one n_q x n_k matrix per head
};

enum class RelevancePooling { kMax, kMean };

struct GateOutput {
  Matrix unified;
  std::vector<double> w2d;
  std::vector<double> w3d;
};

struct DecodeOutput {
  Matrix logits;                   // m x N_S
  std::vector<double> confidence;  // m
};

// Dense kernels shared by the fusion operators; row-parallel, each output
// element reduced serially in a fixed order.
Matrix apply(const Linear& layer, const Matrix& x);
Matrix apply(const Mlp2& mlp, const Matrix& x);

Matrix adapter(const Matrix& point_features_sp, const ParameterBundle& params);

Matrix multi_head_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                            const AttentionParams& params, std::size_t heads,
                            AttentionTrace* trace = nullptr);

Matrix intra_modal_fuse(const Matrix& dense_sp, const Matrix& instance_sp,
                        const ParameterBundle& params);

GateOutput cross_modal_gate(const Matrix& v2d, const Matrix& v3d, const ParameterBundle& params);

/// FPS (seed 0) over centroids picks n_seeds candidates, which are ranked by
/// their best (or mean) scaled dot product against the text tokens.
QuerySet select_queries(const Matrix& unified, const std::vector<Vec3>& centroids,
                        const TextEmbedding& text, const ParameterBundle& params,
                        std::size_t n_seeds, std::size_t m,
                        RelevancePooling pooling = RelevancePooling::kMax);

/// Cross-attention from the queries into the instance bank (rows are f_inst).
QuerySet instance_refine(const QuerySet& queries, const Matrix& instance_bank,
                         const ParameterBundle& params);

DecodeOutput decode(const QuerySet& queries, const Matrix& unified, const ParameterBundle& params,
                    std::size_t layers);

BinaryMask predict_mask(const DecodeOutput& decoded, const SuperpointPartition& partition,
                        double logit_threshold, double conf_threshold);

}  // namespace liftseg

#endif  // LIFTSEG_FUSION_HPP
