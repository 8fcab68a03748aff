// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "liftseg/error.hpp"
#include "liftseg/reference.hpp"

namespace liftseg::reference {

std::array<double, 3> solve3(const Mat3& a, const std::array<double, 3>& b) {
  double m[3][4];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r][c] = a[r][c];
    m[r][3] = b[r];
  }
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    require(m[pivot][col] != 0.0, ErrorKind::kValidation, "singular 3x3 system");
    for (int c = 0; c < 4; ++c) std::swap(m[col][c], m[pivot][c]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return {m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]};
}

namespace {

std::array<double, 4> mul4(const Mat4& t, const std::array<double, 4>& x) {
  std::array<double, 4> y{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) y[r] += t[r][c] * x[c];
  return y;
}

Mat4 invert4(const Mat4& t) {
  double m[4][8];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      m[r][c] = t[r][c];
      m[r][c + 4] = r == c ? 1.0 : 0.0;
    }
  }
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    for (int c = 0; c < 8; ++c) std::swap(m[col][c], m[pivot][c]);
    const double p = m[col][col];
    for (int c = 0; c < 8; ++c) m[col][c] /= p;
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = m[r][col];
      for (int c = 0; c < 8; ++c) m[r][c] -= f * m[col][c];
    }
  }
  Mat4 inv{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) inv[r][c] = m[r][c + 4];
  return inv;
}

}  // namespace

Vec3 backproject_pixel(const CameraView& view, double u, double v, double depth) {
  if (!(depth > 0.0)) fail(ErrorKind::kInvalidDepth, "depth must be positive");
  if (u < 0.0 || v < 0.0 || u >= static_cast<double>(view.width()) ||
      v >= static_cast<double>(view.height()))
    fail(ErrorKind::kBounds, "pixel outside the image");
  const auto cam = solve3(view.intrinsics(), {u * depth, v * depth, depth});
  const auto world = mul4(view.extrinsics(), {cam[0], cam[1], cam[2], 1.0});
  return {world[0], world[1], world[2]};
}

PixelProjection project_point(const CameraView& view, Vec3 p) {
  const auto cam = mul4(invert4(view.extrinsics()), {p.x, p.y, p.z, 1.0});
  if (cam[2] <= 0.0) fail(ErrorKind::kBehindCamera, "point is behind the camera");
  const Mat3& k = view.intrinsics();
  std::array<double, 3> pix{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) pix[r] += k[r][c] * cam[c];
  return {pix[0] / pix[2], pix[1] / pix[2], cam[2]};
}

std::vector<LiftedPixel> backproject_view(const CameraView& view) {
  std::vector<LiftedPixel> out;
  for (std::size_t row = 0; row < view.height(); ++row) {
    for (std::size_t col = 0; col < view.width(); ++col) {
      const double d = view.depth()(row, col);
      if (d <= 0.0) continue;
      out.push_back({row * view.width() + col,
                     reference::backproject_pixel(view, static_cast<double>(col), static_cast<double>(row), d)});
    }
  }
  return out;
}

bool visibility_check(const CameraView& view, Vec3 p, double tau) {
  PixelProjection proj;
  try {
    proj = reference::project_point(view, p);
  } catch (const Error&) {
    return false;
  }
  const long col = std::lround(proj.u);
  const long row = std::lround(proj.v);
  if (col < 0 || row < 0 || col >= static_cast<long>(view.width()) ||
      row >= static_cast<long>(view.height()))
    return false;
  const double observed = view.depth()(static_cast<std::size_t>(row), static_cast<std::size_t>(col));
  return std::abs(proj.depth - observed) < tau;
}

std::vector<std::uint32_t> radius_scan(const std::vector<Vec3>& points, Vec3 center,
                                       double radius) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double dx = points[i].x - center.x;
    const double dy = points[i].y - center.y;
    const double dz = points[i].z - center.z;
    if (dx * dx + dy * dy + dz * dz <= radius * radius) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

std::vector<std::size_t> farthest_point_sampling(const std::vector<Vec3>& points, std::size_t k,
                                                 std::size_t seed_index) {
  if (k < 1 || k > points.size()) fail(ErrorKind::kSize, "FPS needs 1 <= k <= N");
  if (seed_index >= points.size()) fail(ErrorKind::kBounds, "FPS seed out of range");
  std::vector<std::size_t> selected{seed_index};
  std::vector<bool> taken(points.size(), false);
  taken[seed_index] = true;
  while (selected.size() < k) {
    std::size_t best = points.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (taken[i]) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t s : selected) {
        const double dx = points[i].x - points[s].x;
        const double dy = points[i].y - points[s].y;
        const double dz = points[i].z - points[s].z;
        nearest = std::min(nearest, dx * dx + dy * dy + dz * dz);
      }
      if (nearest > best_d) {
        best_d = nearest;
        best = i;
      }
    }
    taken[best] = true;
    selected.push_back(best);
  }
  return selected;
}

}  // namespace liftseg::reference
