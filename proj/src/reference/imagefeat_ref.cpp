// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "liftseg/error.hpp"
#include "liftseg/reference.hpp"

namespace liftseg::reference {

std::vector<InstanceMask> filter_masks(const std::vector<InstanceMask>& masks, double theta_iou,
                                       double theta_stab) {
  std::vector<InstanceMask> kept;
  std::copy_if(masks.begin(), masks.end(), std::back_inserter(kept), [&](const InstanceMask& m) {
    return m.pred_iou >= theta_iou && m.stability >= theta_stab;
  });
  return kept;
}

SoftMask gaussian_soften(const InstanceMask& mask, double sigma) {
  require(sigma > 0.0, ErrorKind::kConfig, "sigma must be positive");
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  const long size = 2 * radius + 1;
  std::vector<double> kernel(static_cast<std::size_t>(size * size));
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    for (long j = -radius; j <= radius; ++j) {
      const double w = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * sigma * sigma));
      kernel[static_cast<std::size_t>((i + radius) * size + (j + radius))] = w;
      total += w;
    }
  }
  for (double& w : kernel) w /= total;

  const long h = static_cast<long>(mask.mask.height);
  const long w = static_cast<long>(mask.mask.width);
  Matrix out(mask.mask.height, mask.mask.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        for (long j = -radius; j <= radius; ++j) {
          const long sy = std::min(std::max(y + i, 0L), h - 1);
          const long sx = std::min(std::max(x + j, 0L), w - 1);
          acc += kernel[static_cast<std::size_t>((i + radius) * size + (j + radius))] *
                 mask.mask.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
        }
      }
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = std::min(1.0, std::max(0.0, acc));
    }
  }
  return {out};
}

namespace {

double sample_coord(std::size_t dst, std::size_t in, std::size_t out) {
  const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) /
                       static_cast<double>(out) - 0.5;
  return std::min(std::max(s, 0.0), static_cast<double>(in) - 1.0);
}

}  // namespace

Tensor3 bilinear_resize(const Tensor3& grid, std::size_t out_h, std::size_t out_w) {
  Tensor3 out(out_h, out_w, grid.dim());
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = sample_coord(y, grid.height(), out_h);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, grid.height() - 1);
    const double wy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = sample_coord(x, grid.width(), out_w);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, grid.width() - 1);
      const double wx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < grid.dim(); ++c) {
        out(y, x, c) = (1 - wy) * (1 - wx) * grid(y0, x0, c) + (1 - wy) * wx * grid(y0, x1, c) +
                       wy * (1 - wx) * grid(y1, x0, c) + wy * wx * grid(y1, x1, c);
      }
    }
  }
  return out;
}

Matrix bilinear_resize(const Matrix& grid, std::size_t out_h, std::size_t out_w) {
  Tensor3 t(grid.rows(), grid.cols(), 1);
  for (std::size_t y = 0; y < grid.rows(); ++y)
    for (std::size_t x = 0; x < grid.cols(); ++x) t(y, x, 0) = grid(y, x);
  const Tensor3 r = reference::bilinear_resize(t, out_h, out_w);
  Matrix out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x) out(y, x) = r(y, x, 0);
  return out;
}

std::vector<double> masked_pool(const TokenGrid& tokens, const SoftMask& soft) {
  const Tensor3& t = tokens.values;
  require(soft.weights.rows() == t.height() && soft.weights.cols() == t.width(),
          ErrorKind::kShape, "soft mask shape differs from token grid");
  std::vector<double> num(t.dim(), 0.0);
  double den = 0.0;
  for (std::size_t y = 0; y < t.height(); ++y) {
    for (std::size_t x = 0; x < t.width(); ++x) {
      den += soft.weights(y, x);
      for (std::size_t c = 0; c < t.dim(); ++c) num[c] += soft.weights(y, x) * t(y, x, c);
    }
  }
  if (den <= 1e-8) fail(ErrorKind::kDegenerateMask, "degenerate soft mask");
  for (double& v : num) v /= den;
  return num;
}

}  // namespace liftseg::reference
