// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_SUPERPOINT_HPP
#define LIFTSEG_SUPERPOINT_HPP

#include <cstdint>
#include <vector>

#include "liftseg/geometry.hpp"
#include "liftseg/imagefeat.hpp"
#include "liftseg/tensor.hpp"

namespace liftseg {

/// Point-to-superpoint assignment with dense ids in [0, count).
class SuperpointPartition {
 public:
  SuperpointPartition() = default;
  /// Throws kValidation unless ids are dense and every superpoint is nonempty.
  SuperpointPartition(std::vector<std::int32_t> assignment, std::size_t count);

  std::size_t point_count() const noexcept { return assignment_.size(); }
  std::size_t count() const noexcept { return count_; }
  const std::vector<std::int32_t>& assignment() const noexcept { return assignment_; }
  std::size_t operator[](std::size_t point) const {
    return static_cast<std::size_t>(assignment_[point]);
  }
  /// Members of each superpoint, ascending.
  std::vector<std::vector<std::size_t>> members() const;

 private:
  std::vector<std::int32_t> assignment_;
  std::size_t count_ = 0;
};

/// Per-superpoint features plus the accumulated weight that produced them.
/// Rows with zero coverage are zero vectors.
struct SuperpointFeatures {
  Matrix values;
  std::vector<double> coverage;
};

/// How samples from several views are combined for one superpoint.
enum class MultiViewPooling {
  kGlobalMean,   // one weighted mean over all gathered samples
  kPerViewMean,  // mean of the per-view weighted means
};

struct LiftingOptions {
  double radius = 0.05;
  double tau = kDefaultVisibilityTau;
  MultiViewPooling pooling = MultiViewPooling::kGlobalMean;
  std::size_t feature_dim = 0;  // output width when there is nothing to infer it from
};

/// Instance features of one view: soft masks at image resolution and their
/// pooled features.
struct ViewInstances {
  std::vector<SoftMask> masks;
  std::vector<std::vector<double>> features;
};

Matrix pool_point_features(const Matrix& point_features, const SuperpointPartition& partition);

std::vector<Vec3> superpoint_centroids(const PointCloud& cloud,
                                       const SuperpointPartition& partition);

// Both aggregators lift every valid-depth pixel, then gather the samples that
// fall within `radius` of each superpoint centroid. A view contributes to a
// superpoint only when the centroid passes visibility_check in that view.
SuperpointFeatures aggregate_dense(const PointCloud& cloud, const SuperpointPartition& partition,
                                   const std::vector<CameraView>& views,
                                   const std::vector<FeatureMap>& maps,
                                   const LiftingOptions& options = {});

SuperpointFeatures aggregate_instance(const PointCloud& cloud,
                                      const SuperpointPartition& partition,
                                      const std::vector<CameraView>& views,
                                      const std::vector<ViewInstances>& instances,
                                      const LiftingOptions& options = {});

BinaryMask expand_mask(const BinaryMask& superpoint_mask, const SuperpointPartition& partition);

}  // namespace liftseg

#endif  // LIFTSEG_SUPERPOINT_HPP
