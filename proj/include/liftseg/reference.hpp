// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_REFERENCE_HPP
#define LIFTSEG_REFERENCE_HPP

// Serial brute-force counterparts of the parallel kernels. They are written
// for clarity rather than speed and share no arithmetic helpers with the main
// implementation, so they can serve as oracles in tests and in `oracle` runs.

#include <cstdint>
#include <vector>

#include "liftseg/fusion.hpp"
#include "liftseg/geometry.hpp"
#include "liftseg/imagefeat.hpp"
#include "liftseg/superpoint.hpp"

namespace liftseg::reference {

/// Solves A x = b for a dense 3x3 system by Gaussian elimination.
std::array<double, 3> solve3(const Mat3& a, const std::array<double, 3>& b);

Vec3 backproject_pixel(const CameraView& view, double u, double v, double depth);
PixelProjection project_point(const CameraView& view, Vec3 p);
std::vector<LiftedPixel> backproject_view(const CameraView& view);
bool visibility_check(const CameraView& view, Vec3 p, double tau);

/// O(N) distance scan; indices ascending.
std::vector<std::uint32_t> radius_scan(const std::vector<Vec3>& points, Vec3 center,
                                       double radius);
/// Recomputes every candidate's distance to the whole selected set each step.
std::vector<std::size_t> farthest_point_sampling(const std::vector<Vec3>& points, std::size_t k,
                                                 std::size_t seed_index);

std::vector<InstanceMask> filter_masks(const std::vector<InstanceMask>& masks, double theta_iou,
                                       double theta_stab);
/// Direct 2D convolution with the outer-product kernel and clamped indices.
SoftMask gaussian_soften(const InstanceMask& mask, double sigma);
Tensor3 bilinear_resize(const Tensor3& grid, std::size_t out_h, std::size_t out_w);
Matrix bilinear_resize(const Matrix& grid, std::size_t out_h, std::size_t out_w);
std::vector<double> masked_pool(const TokenGrid& tokens, const SoftMask& soft);

Matrix pool_point_features(const Matrix& point_features, const SuperpointPartition& partition);
std::vector<Vec3> superpoint_centroids(const PointCloud& cloud,
                                       const SuperpointPartition& partition);
/// Per superpoint, per view, per pixel: lift, test distance, accumulate.
SuperpointFeatures aggregate_dense(const PointCloud& cloud, const SuperpointPartition& partition,
                                   const std::vector<CameraView>& views,
                                   const std::vector<FeatureMap>& maps,
                                   const LiftingOptions& options);
SuperpointFeatures aggregate_instance(const PointCloud& cloud,
                                      const SuperpointPartition& partition,
                                      const std::vector<CameraView>& views,
                                      const std::vector<ViewInstances>& instances,
                                      const LiftingOptions& options);
BinaryMask expand_mask(const BinaryMask& superpoint_mask, const SuperpointPartition& partition);

Matrix linear(const Linear& layer, const Matrix& x);
Matrix mlp(const Mlp2& mlp, const Matrix& x);
Matrix adapter(const Matrix& point_features_sp, const ParameterBundle& params);
Matrix attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                 const AttentionParams& params, std::size_t heads, AttentionTrace* trace = nullptr);
Matrix intra_modal_fuse(const Matrix& dense_sp, const Matrix& instance_sp,
                        const ParameterBundle& params);
GateOutput cross_modal_gate(const Matrix& v2d, const Matrix& v3d, const ParameterBundle& params);
QuerySet select_queries(const Matrix& unified, const std::vector<Vec3>& centroids,
                        const TextEmbedding& text, const ParameterBundle& params,
                        std::size_t n_seeds, std::size_t m, RelevancePooling pooling);
QuerySet instance_refine(const QuerySet& queries, const Matrix& instance_bank,
                         const ParameterBundle& params);
DecodeOutput decode(const QuerySet& queries, const Matrix& unified, const ParameterBundle& params,
                    std::size_t layers);
BinaryMask predict_mask(const DecodeOutput& decoded, const SuperpointPartition& partition,
                        double logit_threshold, double conf_threshold);

}  // namespace liftseg::reference

#endif  // LIFTSEG_REFERENCE_HPP
