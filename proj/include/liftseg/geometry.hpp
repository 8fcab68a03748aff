// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_GEOMETRY_HPP
#define LIFTSEG_GEOMETRY_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "liftseg/tensor.hpp"

namespace liftseg {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double squared_distance(Vec3 a, Vec3 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

using Mat3 = std::array<std::array<double, 3>, 3>;
using Mat4 = std::array<std::array<double, 4>, 4>;

Mat3 identity3();
Mat4 identity4();

/// N x 3 positions with optional N x 3 colors in [0,1].
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> positions, std::vector<Vec3> colors = {});

  std::size_t size() const noexcept { return positions_.size(); }
  const std::vector<Vec3>& positions() const noexcept { return positions_; }
  const std::vector<Vec3>& colors() const noexcept { return colors_; }
  bool has_colors() const noexcept { return !colors_.empty(); }

 private:
  std::vector<Vec3> positions_;
  std::vector<Vec3> colors_;
};

/// One RGB-D view. Pixel (u, v) is (column, row) with the origin at the center
/// of the top-left pixel; depth 0 marks an invalid pixel.
class CameraView {
 public:
  CameraView() = default;
  /// Validates intrinsics/extrinsics/depth; throws kValidation on violation.
  CameraView(const Mat3& intrinsics, const Mat4& extrinsics, Matrix depth);

  const Mat3& intrinsics() const noexcept { return intrinsics_; }
  /// Camera-to-world rigid transform.
  const Mat4& extrinsics() const noexcept { return extrinsics_; }
  const Matrix& depth() const noexcept { return depth_; }
  std::size_t width() const noexcept { return depth_.cols(); }
  std::size_t height() const noexcept { return depth_.rows(); }

  /// World point to camera frame (applies the inverse of the extrinsics).
  Vec3 world_to_camera(Vec3 p) const;
  Vec3 camera_to_world(Vec3 p) const;

 private:
  Mat3 intrinsics_{};
  Mat4 extrinsics_{};
  Matrix depth_;
};

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

struct LiftedPixel {
  std::size_t pixel = 0;  // row-major index v * width + u
  Vec3 position;
};

Vec3 backproject_pixel(const CameraView& view, double u, double v, double depth);
PixelProjection project_point(const CameraView& view, Vec3 p);
/// Every pixel with depth > 0, lifted to world space, in pixel order.
std::vector<LiftedPixel> backproject_view(const CameraView& view);

inline constexpr double kDefaultVisibilityTau = 0.05;

bool visibility_check(const CameraView& view, Vec3 p, double tau = kDefaultVisibilityTau);

/// Uniform voxel hash over a fixed point set.
class SpatialIndex {
 public:
  SpatialIndex(std::vector<Vec3> points, double cell_size);

  double cell_size() const noexcept { return cell_size_; }
  std::size_t point_count() const noexcept { return points_.size(); }
  std::size_t cell_count() const noexcept { return cells_.size(); }
  const std::vector<Vec3>& points() const noexcept { return points_; }

  /// Point indices in the cell containing floor(p / cell_size).
  std::vector<std::uint32_t> cell_members(Vec3 p) const;

  /// Indices with distance to center <= radius, ascending.
  std::vector<std::uint32_t> radius_query(Vec3 center, double radius) const;

 private:
  using Coord = std::array<std::int64_t, 3>;
  struct Range {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };
  Coord coord_of(Vec3 p) const;
  /// Row-major cell number inside the occupied bounding box; nullopt outside.
  std::optional<std::uint64_t> key_of(const Coord& c) const;

  double cell_size_;
  std::vector<Vec3> points_;
  Coord origin_{};  // smallest occupied cell coordinate per axis
  Coord extent_{};  // occupied cells per axis
  std::vector<std::uint32_t> sorted_;  // point indices grouped by cell, ascending within a cell
  std::unordered_map<std::uint64_t, Range> cells_;
};

SpatialIndex build_index(const std::vector<Vec3>& points, double cell_size);

inline std::vector<std::uint32_t> radius_query(const SpatialIndex& index, Vec3 center,
                                               double radius) {
  return index.radius_query(center, radius);
}

/// Runs radius_query for every center (data-parallel over centers).
std::vector<std::vector<std::uint32_t>> radius_query_batch(const SpatialIndex& index,
                                                           const std::vector<Vec3>& centers,
                                                           double radius);

/// Greedy max-min sampling starting at seed_index; ties go to the smaller index.
std::vector<std::size_t> farthest_point_sampling(const std::vector<Vec3>& points, std::size_t k,
                                                 std::size_t seed_index);

}  // namespace liftseg

#endif  // LIFTSEG_GEOMETRY_HPP
