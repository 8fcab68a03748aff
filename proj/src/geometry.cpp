// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "liftseg/error.hpp"

namespace liftseg {

Mat3 identity3() {
  Mat3 m{};
  for (int i = 0; i < 3; ++i) m[i][i] = 1.0;
  return m;
}

Mat4 identity4() {
  Mat4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

namespace {

bool finite(Vec3 p) { return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z); }

}  // namespace

PointCloud::PointCloud(std::vector<Vec3> positions, std::vector<Vec3> colors)
    : positions_(std::move(positions)), colors_(std::move(colors)) {
  require(!positions_.empty(), ErrorKind::kValidation, "point cloud is empty");
  require(colors_.empty() || colors_.size() == positions_.size(), ErrorKind::kValidation,
          "color count differs from point count");
  for (const Vec3& p : positions_)
    require(finite(p), ErrorKind::kValidation, "non-finite point coordinate");
  for (const Vec3& c : colors_) {
    for (double ch : {c.x, c.y, c.z})
      require(ch >= 0.0 && ch <= 1.0, ErrorKind::kValidation, "color channel outside [0,1]");
  }
}

CameraView::CameraView(const Mat3& intrinsics, const Mat4& extrinsics, Matrix depth)
    : intrinsics_(intrinsics), extrinsics_(extrinsics), depth_(std::move(depth)) {
  const Mat3& k = intrinsics_;
  require(k[1][0] == 0.0 && k[2][0] == 0.0 && k[2][1] == 0.0 && k[2][2] == 1.0,
          ErrorKind::kValidation, "intrinsics must be upper-triangular with bottom row (0,0,1)");
  require(k[0][0] > 0.0 && k[1][1] > 0.0, ErrorKind::kValidation,
          "intrinsics focal entries must be positive");
  for (const auto& row : k)
    for (double v : row) require(std::isfinite(v), ErrorKind::kValidation, "non-finite intrinsics");

  const Mat4& t = extrinsics_;
  for (const auto& row : t)
    for (double v : row) require(std::isfinite(v), ErrorKind::kValidation, "non-finite extrinsics");
  require(t[3][0] == 0.0 && t[3][1] == 0.0 && t[3][2] == 0.0 && t[3][3] == 1.0,
          ErrorKind::kValidation, "extrinsics bottom row must be (0,0,0,1)");
  constexpr double kOrthoTol = 1e-6;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int r = 0; r < 3; ++r) d += t[r][i] * t[r][j];
      require(std::abs(d - (i == j ? 1.0 : 0.0)) < kOrthoTol, ErrorKind::kValidation,
              "extrinsics rotation is not orthonormal");
    }
  }
  const double det = t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) -
                     t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0]) +
                     t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0]);
  require(det > 0.0, ErrorKind::kValidation, "extrinsics rotation has negative determinant");

  require(depth_.rows() > 0 && depth_.cols() > 0, ErrorKind::kValidation, "empty depth map");
  for (double d : depth_.data())
    require(std::isfinite(d) && d >= 0.0, ErrorKind::kValidation,
            "depth values must be finite and >= 0");
}

Vec3 CameraView::world_to_camera(Vec3 p) const {
  const Mat4& t = extrinsics_;
  const Vec3 d{p.x - t[0][3], p.y - t[1][3], p.z - t[2][3]};
  // R^T d
  return {t[0][0] * d.x + t[1][0] * d.y + t[2][0] * d.z,
          t[0][1] * d.x + t[1][1] * d.y + t[2][1] * d.z,
          t[0][2] * d.x + t[1][2] * d.y + t[2][2] * d.z};
}

Vec3 CameraView::camera_to_world(Vec3 p) const {
  const Mat4& t = extrinsics_;
  return {t[0][0] * p.x + t[0][1] * p.y + t[0][2] * p.z + t[0][3],
          t[1][0] * p.x + t[1][1] * p.y + t[1][2] * p.z + t[1][3],
          t[2][0] * p.x + t[2][1] * p.y + t[2][2] * p.z + t[2][3]};
}

namespace {

// K^-1 (u d, v d, d) for upper-triangular K, by back substitution.
Vec3 unproject(const Mat3& k, double u, double v, double d) {
  const double y = (v - k[1][2]) * d / k[1][1];
  const double x = (u * d - k[0][1] * y - k[0][2] * d) / k[0][0];
  return {x, y, d};
}

}  // namespace

Vec3 backproject_pixel(const CameraView& view, double u, double v, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    fail(ErrorKind::kInvalidDepth, "depth must be positive, got " + std::to_string(depth));
  if (!(u >= 0.0 && u < static_cast<double>(view.width()) && v >= 0.0 &&
        v < static_cast<double>(view.height())))
    fail(ErrorKind::kBounds, "pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                                 ") outside the image");
  return view.camera_to_world(unproject(view.intrinsics(), u, v, depth));
}

PixelProjection project_point(const CameraView& view, Vec3 p) {
  const Vec3 c = view.world_to_camera(p);
  if (!(c.z > 0.0)) fail(ErrorKind::kBehindCamera, "point is behind the camera");
  const Mat3& k = view.intrinsics();
  return {(k[0][0] * c.x + k[0][1] * c.y) / c.z + k[0][2], k[1][1] * c.y / c.z + k[1][2], c.z};
}

std::vector<LiftedPixel> backproject_view(const CameraView& view) {
  const std::size_t h = view.height();
  const std::size_t w = view.width();
  const Matrix& depth = view.depth();

  // Count per row, prefix-sum, then fill; output stays in pixel order.
  std::vector<std::size_t> offsets(h + 1, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(h); ++y) {
    std::size_t n = 0;
    for (double d : depth.row(static_cast<std::size_t>(y))) n += d > 0.0 ? 1 : 0;
    offsets[static_cast<std::size_t>(y) + 1] = n;
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());

  std::vector<LiftedPixel> out(offsets.back());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t yi = 0; yi < static_cast<std::ptrdiff_t>(h); ++yi) {
    const auto y = static_cast<std::size_t>(yi);
    std::size_t slot = offsets[y];
    for (std::size_t x = 0; x < w; ++x) {
      const double d = depth(y, x);
      if (d > 0.0) {
        out[slot++] = {y * w + x, backproject_pixel(view, static_cast<double>(x),
                                                    static_cast<double>(y), d)};
      }
    }
  }
  return out;
}

bool visibility_check(const CameraView& view, Vec3 p, double tau) {
  require(tau > 0.0, ErrorKind::kConfig, "visibility tau must be positive");
  const Vec3 c = view.world_to_camera(p);
  if (!(c.z > 0.0)) return false;
  const PixelProjection proj = project_point(view, p);
  const double col = std::round(proj.u);
  const double row = std::round(proj.v);
  if (!(col >= 0.0 && row >= 0.0 && col < static_cast<double>(view.width()) &&
        row < static_cast<double>(view.height())))
    return false;
  const double observed =
      view.depth()(static_cast<std::size_t>(row), static_cast<std::size_t>(col));
  return std::abs(proj.depth - observed) < tau;
}

SpatialIndex::Coord SpatialIndex::coord_of(Vec3 p) const {
  return {static_cast<std::int64_t>(std::floor(p.x / cell_size_)),
          static_cast<std::int64_t>(std::floor(p.y / cell_size_)),
          static_cast<std::int64_t>(std::floor(p.z / cell_size_))};
}

std::optional<std::uint64_t> SpatialIndex::key_of(const Coord& c) const {
  std::uint64_t key = 0;
  for (int a = 0; a < 3; ++a) {
    const std::int64_t rel = c[a] - origin_[a];
    if (rel < 0 || rel >= extent_[a]) return std::nullopt;
    key = key * static_cast<std::uint64_t>(extent_[a]) + static_cast<std::uint64_t>(rel);
  }
  return key;
}

SpatialIndex::SpatialIndex(std::vector<Vec3> points, double cell_size)
    : cell_size_(cell_size), points_(std::move(points)) {
  require(cell_size > 0.0 && std::isfinite(cell_size), ErrorKind::kConfig,
          "cell size must be positive");
  require(points_.size() < std::numeric_limits<std::uint32_t>::max(), ErrorKind::kSize,
          "too many points for a 32-bit index");
  const std::size_t n = points_.size();
  if (n == 0) return;

  std::vector<Coord> coords(n);
  Coord hi{};
  for (std::size_t i = 0; i < n; ++i) {
    coords[i] = coord_of(points_[i]);
    for (int a = 0; a < 3; ++a) {
      origin_[a] = i == 0 ? coords[i][a] : std::min(origin_[a], coords[i][a]);
      hi[a] = i == 0 ? coords[i][a] : std::max(hi[a], coords[i][a]);
    }
  }
  double cells = 1.0;
  for (int a = 0; a < 3; ++a) {
    extent_[a] = hi[a] - origin_[a] + 1;
    cells *= static_cast<double>(extent_[a]);
  }
  require(cells < 0x1.0p63, ErrorKind::kBounds, "point extent too large for the cell size");

  std::vector<std::uint64_t> keys(n);
  std::uint64_t max_key = 0;
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = *key_of(coords[i]);
    max_key = std::max(max_key, keys[i]);
  }

  // Stable LSD radix sort on 16-bit digits keeps indices ascending per cell.
  sorted_.resize(n);
  std::iota(sorted_.begin(), sorted_.end(), 0U);
  std::vector<std::uint32_t> scratch(n);
  std::vector<std::uint32_t> counts(std::size_t{1} << 16);
  for (unsigned shift = 0; shift < 64 && (max_key >> shift) != 0; shift += 16) {
    std::fill(counts.begin(), counts.end(), 0U);
    for (std::uint32_t idx : sorted_) ++counts[(keys[idx] >> shift) & 0xFFFF];
    std::uint32_t running = 0;
    for (auto& c : counts) running += std::exchange(c, running);
    for (std::uint32_t idx : sorted_) scratch[counts[(keys[idx] >> shift) & 0xFFFF]++] = idx;
    sorted_.swap(scratch);
  }

  cells_.reserve(n / 2 + 1);
  std::uint32_t begin = 0;
  while (begin < n) {
    std::uint32_t end = begin + 1;
    while (end < n && keys[sorted_[end]] == keys[sorted_[begin]]) ++end;
    cells_.emplace(keys[sorted_[begin]], Range{begin, end});
    begin = end;
  }
}

std::vector<std::uint32_t> SpatialIndex::cell_members(Vec3 p) const {
  const auto key = key_of(coord_of(p));
  if (!key) return {};
  const auto it = cells_.find(*key);
  if (it == cells_.end()) return {};
  return {sorted_.begin() + it->second.begin, sorted_.begin() + it->second.end};
}

std::vector<std::uint32_t> SpatialIndex::radius_query(Vec3 center, double radius) const {
  require(radius > 0.0, ErrorKind::kConfig, "query radius must be positive");
  const double r2 = radius * radius;
  Coord lo = coord_of({center.x - radius, center.y - radius, center.z - radius});
  Coord hi = coord_of({center.x + radius, center.y + radius, center.z + radius});
  // Cells outside the occupied box are empty; clip the scan to it.
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(lo[a], origin_[a]);
    hi[a] = std::min(hi[a], origin_[a] + extent_[a] - 1);
  }

  std::vector<std::uint32_t> out;
  for (std::int64_t cx = lo[0]; cx <= hi[0]; ++cx) {
    for (std::int64_t cy = lo[1]; cy <= hi[1]; ++cy) {
      for (std::int64_t cz = lo[2]; cz <= hi[2]; ++cz) {
        const auto it = cells_.find(*key_of({cx, cy, cz}));
        if (it == cells_.end()) continue;
        for (std::uint32_t s = it->second.begin; s < it->second.end; ++s) {
          const std::uint32_t idx = sorted_[s];
          if (squared_distance(points_[idx], center) <= r2) out.push_back(idx);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

SpatialIndex build_index(const std::vector<Vec3>& points, double cell_size) {
  return SpatialIndex(points, cell_size);
}

std::vector<std::vector<std::uint32_t>> radius_query_batch(const SpatialIndex& index,
                                                           const std::vector<Vec3>& centers,
                                                           double radius) {
  require(radius > 0.0, ErrorKind::kConfig, "query radius must be positive");
  std::vector<std::vector<std::uint32_t>> out(centers.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(centers.size()); ++i)
    out[static_cast<std::size_t>(i)] =
        index.radius_query(centers[static_cast<std::size_t>(i)], radius);
  return out;
}

std::vector<std::size_t> farthest_point_sampling(const std::vector<Vec3>& points, std::size_t k,
                                                 std::size_t seed_index) {
  const std::size_t n = points.size();
  if (k < 1 || k > n)
    fail(ErrorKind::kSize, "FPS needs 1 <= k <= N (k=" + std::to_string(k) +
                               ", N=" + std::to_string(n) + ")");
  require(seed_index < n, ErrorKind::kBounds, "FPS seed index out of range");

  std::vector<std::size_t> selected{seed_index};
  selected.reserve(k);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  min_d2[seed_index] = -1.0;  // selected points never win the argmax
  std::size_t last = seed_index;

  while (selected.size() < k) {
    double best_d = -1.0;
    std::size_t best_i = n;
#pragma omp parallel
    {
      double local_d = -1.0;
      std::size_t local_i = n;
#pragma omp for schedule(static) nowait
      for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        min_d2[i] = std::min(min_d2[i], squared_distance(points[i], points[last]));
        if (min_d2[i] > local_d) {
          local_d = min_d2[i];
          local_i = i;
        }
      }
#pragma omp critical
      {
        if (local_d > best_d || (local_d == best_d && local_i < best_i)) {
          best_d = local_d;
          best_i = local_i;
        }
      }
    }
    selected.push_back(best_i);
    min_d2[best_i] = -1.0;
    last = best_i;
  }
  return selected;
}

}  // namespace liftseg
