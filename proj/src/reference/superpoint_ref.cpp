// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>

#include "liftseg/error.hpp"
#include "liftseg/reference.hpp"

namespace liftseg::reference {

Matrix pool_point_features(const Matrix& point_features, const SuperpointPartition& partition) {
  require(point_features.rows() == partition.point_count(), ErrorKind::kShape,
          "point features and partition differ in length");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < partition.point_count(); ++i) groups[partition[i]].push_back(i);
  Matrix out(partition.count(), point_features.cols());
  for (const auto& [s, rows] : groups) {
    for (std::size_t c = 0; c < point_features.cols(); ++c) {
      double sum = 0.0;
      for (std::size_t r : rows) sum += point_features(r, c);
      out(s, c) = sum / static_cast<double>(rows.size());
    }
  }
  return out;
}

std::vector<Vec3> superpoint_centroids(const PointCloud& cloud,
                                       const SuperpointPartition& partition) {
  std::vector<Vec3> sum(partition.count());
  std::vector<double> n(partition.count(), 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t s = partition[i];
    sum[s].x += cloud.positions()[i].x;
    sum[s].y += cloud.positions()[i].y;
    sum[s].z += cloud.positions()[i].z;
    n[s] += 1.0;
  }
  for (std::size_t s = 0; s < sum.size(); ++s) sum[s] = {sum[s].x / n[s], sum[s].y / n[s], sum[s].z / n[s]};
  return sum;
}

namespace {

// Weighted contributions of one pixel: (weight, feature) pairs.
template <class PixelSamples>
SuperpointFeatures brute_force_gather(const PointCloud& cloud,
                                      const SuperpointPartition& partition,
                                      const std::vector<CameraView>& views, std::size_t dim,
                                      const LiftingOptions& options, PixelSamples samples) {
  const std::vector<Vec3> centroids = reference::superpoint_centroids(cloud, partition);
  SuperpointFeatures out{Matrix(partition.count(), dim), std::vector<double>(partition.count(), 0.0)};
  for (std::size_t s = 0; s < partition.count(); ++s) {
    std::vector<double> global(dim, 0.0);
    std::vector<double> mean_of_means(dim, 0.0);
    double total = 0.0;
    std::size_t supported_views = 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
      const CameraView& view = views[v];
      if (!reference::visibility_check(view, centroids[s], options.tau)) continue;
      std::vector<double> acc(dim, 0.0);
      double weight = 0.0;
      for (std::size_t row = 0; row < view.height(); ++row) {
        for (std::size_t col = 0; col < view.width(); ++col) {
          const double d = view.depth()(row, col);
          if (d <= 0.0) continue;
          const Vec3 p = reference::backproject_pixel(view, static_cast<double>(col), static_cast<double>(row), d);
          const double dist = std::sqrt((p.x - centroids[s].x) * (p.x - centroids[s].x) +
                                        (p.y - centroids[s].y) * (p.y - centroids[s].y) +
                                        (p.z - centroids[s].z) * (p.z - centroids[s].z));
          if (dist > options.radius) continue;
          samples(v, row, col, [&](double w, const auto& feature) {
            weight += w;
            for (std::size_t c = 0; c < dim; ++c) acc[c] += w * feature[c];
          });
        }
      }
      if (weight <= 1e-8) continue;
      total += weight;
      ++supported_views;
      for (std::size_t c = 0; c < dim; ++c) {
        global[c] += acc[c];
        mean_of_means[c] += acc[c] / weight;
      }
    }
    if (total <= 1e-8) continue;
    out.coverage[s] = total;
    for (std::size_t c = 0; c < dim; ++c) {
      out.values(s, c) = options.pooling == MultiViewPooling::kGlobalMean
                             ? global[c] / total
                             : mean_of_means[c] / static_cast<double>(supported_views);
    }
  }
  return out;
}

}  // namespace

SuperpointFeatures aggregate_dense(const PointCloud& cloud, const SuperpointPartition& partition,
                                   const std::vector<CameraView>& views,
                                   const std::vector<FeatureMap>& maps,
                                   const LiftingOptions& options) {
  require(views.size() == maps.size(), ErrorKind::kShape, "view/map count mismatch");
  const std::size_t dim = maps.empty() ? options.feature_dim : maps.front().values.dim();
  return brute_force_gather(cloud, partition, views, dim, options,
                            [&](std::size_t v, std::size_t row, std::size_t col, auto&& add) {
                              std::vector<double> f(dim);
                              for (std::size_t c = 0; c < dim; ++c) f[c] = maps[v].values(row, col, c);
                              add(1.0, f);
                            });
}

SuperpointFeatures aggregate_instance(const PointCloud& cloud,
                                      const SuperpointPartition& partition,
                                      const std::vector<CameraView>& views,
                                      const std::vector<ViewInstances>& instances,
                                      const LiftingOptions& options) {
  require(views.size() == instances.size(), ErrorKind::kShape, "view/instance count mismatch");
  std::size_t dim = options.feature_dim;
  for (const ViewInstances& vi : instances)
    if (!vi.features.empty()) {
      dim = vi.features.front().size();
      break;
    }
  return brute_force_gather(cloud, partition, views, dim, options,
                            [&](std::size_t v, std::size_t row, std::size_t col, auto&& add) {
                              const ViewInstances& vi = instances[v];
                              for (std::size_t j = 0; j < vi.masks.size(); ++j) {
                                const double w = vi.masks[j].weights(row, col);
                                if (w != 0.0) add(w, vi.features[j]);
                              }
                            });
}

BinaryMask expand_mask(const BinaryMask& superpoint_mask, const SuperpointPartition& partition) {
  require(superpoint_mask.size() == partition.count(), ErrorKind::kShape,
          "superpoint mask length mismatch");
  BinaryMask out;
  out.reserve(partition.point_count());
  for (std::int32_t id : partition.assignment())
    out.push_back(superpoint_mask[static_cast<std::size_t>(id)] != 0 ? 1 : 0);
  return out;
}

}  // namespace liftseg::reference
