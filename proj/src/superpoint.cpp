// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/superpoint.hpp"

#include <string>

#include "liftseg/error.hpp"

namespace liftseg {

SuperpointPartition::SuperpointPartition(std::vector<std::int32_t> assignment, std::size_t count)
    : assignment_(std::move(assignment)), count_(count) {
  require(!assignment_.empty(), ErrorKind::kValidation, "partition assigns no points");
  require(count_ >= 1, ErrorKind::kValidation, "partition needs at least one superpoint");
  std::vector<std::size_t> sizes(count_, 0);
  for (std::int32_t id : assignment_) {
    require(id >= 0 && static_cast<std::size_t>(id) < count_, ErrorKind::kValidation,
            "superpoint id " + std::to_string(id) + " outside [0, " + std::to_string(count_) + ")");
    ++sizes[static_cast<std::size_t>(id)];
  }
  for (std::size_t s = 0; s < count_; ++s)
    require(sizes[s] > 0, ErrorKind::kValidation, "superpoint " + std::to_string(s) + " is empty");
}

std::vector<std::vector<std::size_t>> SuperpointPartition::members() const {
  std::vector<std::vector<std::size_t>> out(count_);
  for (std::size_t i = 0; i < assignment_.size(); ++i) out[(*this)[i]].push_back(i);
  return out;
}

Matrix pool_point_features(const Matrix& point_features, const SuperpointPartition& partition) {
  require(point_features.rows() == partition.point_count(), ErrorKind::kShape,
          "point feature rows (" + std::to_string(point_features.rows()) +
              ") differ from partition length (" + std::to_string(partition.point_count()) + ")");
  const std::size_t c = point_features.cols();
  const auto members = partition.members();
  Matrix out(partition.count(), c);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(partition.count()); ++si) {
    const auto s = static_cast<std::size_t>(si);
    auto row = out.row(s);
    for (std::size_t p : members[s]) {
      const auto f = point_features.row(p);
      for (std::size_t j = 0; j < c; ++j) row[j] += f[j];
    }
    const double inv = 1.0 / static_cast<double>(members[s].size());
    for (double& v : row) v *= inv;
  }
  return out;
}

std::vector<Vec3> superpoint_centroids(const PointCloud& cloud,
                                       const SuperpointPartition& partition) {
  require(cloud.size() == partition.point_count(), ErrorKind::kShape,
          "cloud size differs from partition length");
  const auto members = partition.members();
  std::vector<Vec3> out(partition.count());
  for (std::size_t s = 0; s < partition.count(); ++s) {
    Vec3 acc;
    for (std::size_t p : members[s]) acc = acc + cloud.positions()[p];
    out[s] = (1.0 / static_cast<double>(members[s].size())) * acc;
  }
  return out;
}

namespace {

// `accumulate(view, lifted, ids, sum, weight)` adds one view's gathered
// samples for one superpoint; `ids` index into the view's lifted pixels.
template <class Accumulate>
SuperpointFeatures gather(const PointCloud& cloud, const SuperpointPartition& partition,
                          const std::vector<CameraView>& views, std::size_t dim,
                          const LiftingOptions& options, const Accumulate& accumulate) {
  require(options.radius > 0.0, ErrorKind::kConfig, "lifting radius must be positive");
  require(options.tau > 0.0, ErrorKind::kConfig, "visibility tau must be positive");
  const std::vector<Vec3> centroids = superpoint_centroids(cloud, partition);
  const std::size_t n_s = partition.count();

  SuperpointFeatures out{Matrix(n_s, dim), std::vector<double>(n_s, 0.0)};
  Matrix view_means(n_s, dim);
  std::vector<std::size_t> views_with_support(n_s, 0);

  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    const CameraView& view = views[vi];
    const std::vector<LiftedPixel> lifted = backproject_view(view);
    if (lifted.empty()) continue;
    std::vector<Vec3> positions(lifted.size());
    for (std::size_t i = 0; i < lifted.size(); ++i) positions[i] = lifted[i].position;
    const SpatialIndex index(std::move(positions), options.radius);

#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n_s); ++si) {
      const auto s = static_cast<std::size_t>(si);
      if (!visibility_check(view, centroids[s], options.tau)) continue;
      const std::vector<std::uint32_t> ids = index.radius_query(centroids[s], options.radius);
      if (ids.empty()) continue;
      std::vector<double> sum(dim, 0.0);
      double weight = 0.0;
      accumulate(vi, lifted, ids, std::span<double>(sum), weight);
      if (!(weight > kDegenerateWeight)) continue;
      auto row = out.values.row(s);
      if (options.pooling == MultiViewPooling::kGlobalMean) {
        for (std::size_t c = 0; c < dim; ++c) row[c] += sum[c];
      } else {
        auto mean_row = view_means.row(s);
        for (std::size_t c = 0; c < dim; ++c) mean_row[c] += sum[c] / weight;
        ++views_with_support[s];
      }
      out.coverage[s] += weight;
    }
  }

  for (std::size_t s = 0; s < n_s; ++s) {
    auto row = out.values.row(s);
    if (!(out.coverage[s] > kDegenerateWeight)) {
      std::fill(row.begin(), row.end(), 0.0);
      out.coverage[s] = 0.0;
      continue;
    }
    if (options.pooling == MultiViewPooling::kGlobalMean) {
      for (double& v : row) v /= out.coverage[s];
    } else {
      const auto mean_row = view_means.row(s);
      const double inv = 1.0 / static_cast<double>(views_with_support[s]);
      for (std::size_t c = 0; c < dim; ++c) row[c] = mean_row[c] * inv;
    }
  }
  return out;
}

void gather_dense(const FeatureMap& map, const std::vector<LiftedPixel>& lifted,
                  const std::vector<std::uint32_t>& ids, std::span<double> sum, double& weight) {
  const std::size_t w = map.values.width();
  for (std::uint32_t id : ids) {
    const std::size_t pixel = lifted[id].pixel;
    const auto f = map.values.pixel(pixel / w, pixel % w);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += f[c];
    weight += 1.0;
  }
}

void gather_instance(const ViewInstances& inst, const std::vector<LiftedPixel>& lifted,
                     const std::vector<std::uint32_t>& ids, std::span<double> sum,
                     double& weight) {
  // sum_p sum_j w_j(p) f_j = sum_j (sum_p w_j(p)) f_j
  for (std::size_t j = 0; j < inst.masks.size(); ++j) {
    const std::vector<double>& wj = inst.masks[j].weights.data();
    double mass = 0.0;
    for (std::uint32_t id : ids) mass += wj[lifted[id].pixel];
    if (mass == 0.0) continue;
    const std::vector<double>& f = inst.features[j];
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += mass * f[c];
    weight += mass;
  }
}

}  // namespace

SuperpointFeatures aggregate_dense(const PointCloud& cloud, const SuperpointPartition& partition,
                                   const std::vector<CameraView>& views,
                                   const std::vector<FeatureMap>& maps,
                                   const LiftingOptions& options) {
  require(views.size() == maps.size(), ErrorKind::kShape,
          std::to_string(views.size()) + " views but " + std::to_string(maps.size()) +
              " feature maps");
  const std::size_t dim = maps.empty() ? options.feature_dim : maps.front().values.dim();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    require(maps[i].values.height() == views[i].height() &&
                maps[i].values.width() == views[i].width(),
            ErrorKind::kShape, "feature map " + std::to_string(i) + " resolution differs from its view");
    require(maps[i].values.dim() == dim, ErrorKind::kShape, "feature maps disagree on width");
  }
  return gather(cloud, partition, views, dim, options,
                [&](std::size_t view, const std::vector<LiftedPixel>& lifted,
                    const std::vector<std::uint32_t>& ids, std::span<double> sum,
                    double& weight) { gather_dense(maps[view], lifted, ids, sum, weight); });
}

SuperpointFeatures aggregate_instance(const PointCloud& cloud,
                                      const SuperpointPartition& partition,
                                      const std::vector<CameraView>& views,
                                      const std::vector<ViewInstances>& instances,
                                      const LiftingOptions& options) {
  require(views.size() == instances.size(), ErrorKind::kShape,
          std::to_string(views.size()) + " views but " + std::to_string(instances.size()) +
              " instance lists");
  std::size_t dim = options.feature_dim;
  bool dim_known = false;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const ViewInstances& inst = instances[i];
    require(inst.masks.size() == inst.features.size(), ErrorKind::kShape,
            "instance masks and features differ in count");
    for (std::size_t j = 0; j < inst.masks.size(); ++j) {
      require(inst.masks[j].weights.rows() == views[i].height() &&
                  inst.masks[j].weights.cols() == views[i].width(),
              ErrorKind::kShape, "soft mask resolution differs from its view");
      if (!dim_known) {
        dim = inst.features[j].size();
        dim_known = true;
      }
      require(inst.features[j].size() == dim, ErrorKind::kShape,
              "instance features disagree on width");
    }
  }
  return gather(cloud, partition, views, dim, options,
                [&](std::size_t view, const std::vector<LiftedPixel>& lifted,
                    const std::vector<std::uint32_t>& ids, std::span<double> sum,
                    double& weight) { gather_instance(instances[view], lifted, ids, sum, weight); });
}

BinaryMask expand_mask(const BinaryMask& superpoint_mask, const SuperpointPartition& partition) {
  require(superpoint_mask.size() == partition.count(), ErrorKind::kShape,
          "superpoint mask length differs from superpoint count");
  BinaryMask out(partition.point_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = superpoint_mask[partition[i]] ? 1 : 0;
  return out;
}

}  // namespace liftseg
