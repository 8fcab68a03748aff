// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/imagefeat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "liftseg/error.hpp"

namespace liftseg {

void validate(const InstanceMask& mask) {
  require(mask.mask.height > 0 && mask.mask.width > 0, ErrorKind::kValidation,
          "instance mask is empty");
  bool any = false;
  for (std::uint8_t v : mask.mask.data) {
    require(v <= 1, ErrorKind::kValidation, "instance mask entries must be 0 or 1");
    any = any || v == 1;
  }
  require(any, ErrorKind::kValidation, "instance mask has no foreground pixel");
  require(mask.pred_iou >= 0.0 && mask.pred_iou <= 1.0, ErrorKind::kValidation,
          "pred_iou outside [0,1]");
  require(mask.stability >= 0.0 && mask.stability <= 1.0, ErrorKind::kValidation,
          "stability outside [0,1]");
}

std::vector<InstanceMask> filter_masks(const std::vector<InstanceMask>& masks, double theta_iou,
                                       double theta_stab) {
  require(theta_iou >= 0.0 && theta_iou <= 1.0 && theta_stab >= 0.0 && theta_stab <= 1.0,
          ErrorKind::kConfig, "mask quality thresholds must lie in [0,1]");
  std::vector<InstanceMask> kept;
  for (const InstanceMask& m : masks) {
    if (m.pred_iou >= theta_iou && m.stability >= theta_stab) kept.push_back(m);
  }
  return kept;
}

std::vector<double> gaussian_kernel(double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::kConfig,
          "gaussian sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

Matrix gaussian_blur(const Matrix& field, double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto h = static_cast<std::ptrdiff_t>(field.rows());
  const auto w = static_cast<std::ptrdiff_t>(field.cols());

  Matrix horizontal(field.rows(), field.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      // Accumulate offsets from the center tap so constant runs stay exact.
      const double center = field(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const std::ptrdiff_t xs = std::clamp<std::ptrdiff_t>(x + k, 0, w - 1);
        acc += taps[static_cast<std::size_t>(k + radius)] *
               (field(static_cast<std::size_t>(y), static_cast<std::size_t>(xs)) - center);
      }
      horizontal(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = center + acc;
    }
  }

  Matrix out(field.rows(), field.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double center = horizontal(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const std::ptrdiff_t ys = std::clamp<std::ptrdiff_t>(y + k, 0, h - 1);
        acc += taps[static_cast<std::size_t>(k + radius)] *
               (horizontal(static_cast<std::size_t>(ys), static_cast<std::size_t>(x)) - center);
      }
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = center + acc;
    }
  }
  return out;
}

SoftMask gaussian_soften(const InstanceMask& mask, double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::kConfig,
          "gaussian sigma must be positive");
  Matrix field(mask.mask.height, mask.mask.width);
  for (std::size_t i = 0; i < mask.mask.data.size(); ++i)
    field.data()[i] = static_cast<double>(mask.mask.data[i]);
  Matrix blurred = gaussian_blur(field, sigma);
  for (double& v : blurred.data()) v = std::clamp(v, 0.0, 1.0);
  return {std::move(blurred)};
}

namespace {

struct Tap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
};

std::vector<Tap> sampling_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[d] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Tensor3 bilinear_resize(const Tensor3& grid, std::size_t out_h, std::size_t out_w) {
  require(out_h >= 1 && out_w >= 1, ErrorKind::kConfig, "resize target must be at least 1x1");
  require(grid.height() >= 1 && grid.width() >= 1, ErrorKind::kShape, "cannot resize empty grid");
  const std::vector<Tap> ys = sampling_taps(grid.height(), out_h);
  const std::vector<Tap> xs = sampling_taps(grid.width(), out_w);
  const std::size_t dim = grid.dim();
  Tensor3 out(out_h, out_w, dim);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t yi = 0; yi < static_cast<std::ptrdiff_t>(out_h); ++yi) {
    const Tap& ty = ys[static_cast<std::size_t>(yi)];
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& tx = xs[x];
      const auto p00 = grid.pixel(ty.lo, tx.lo);
      const auto p01 = grid.pixel(ty.lo, tx.hi);
      const auto p10 = grid.pixel(ty.hi, tx.lo);
      const auto p11 = grid.pixel(ty.hi, tx.hi);
      auto dst = out.pixel(static_cast<std::size_t>(yi), x);
      for (std::size_t c = 0; c < dim; ++c) {
        const double top = p00[c] + (p01[c] - p00[c]) * tx.frac;
        const double bottom = p10[c] + (p11[c] - p10[c]) * tx.frac;
        dst[c] = top + (bottom - top) * ty.frac;
      }
    }
  }
  return out;
}

Matrix bilinear_resize(const Matrix& grid, std::size_t out_h, std::size_t out_w) {
  Tensor3 as_tensor(grid.rows(), grid.cols(), 1);
  as_tensor.data() = grid.data();
  Tensor3 resized = bilinear_resize(as_tensor, out_h, out_w);
  return Matrix(out_h, out_w, std::move(resized.data()));
}

FeatureMap upsample_features(const TokenGrid& tokens, std::size_t out_h, std::size_t out_w) {
  require(tokens.values.dim() >= 1, ErrorKind::kShape, "token grid has no channels");
  return {bilinear_resize(tokens.values, out_h, out_w)};
}

std::vector<double> masked_pool(const TokenGrid& tokens, const SoftMask& soft) {
  const Tensor3& t = tokens.values;
  require(soft.weights.rows() == t.height() && soft.weights.cols() == t.width(),
          ErrorKind::kShape,
          "soft mask " + std::to_string(soft.weights.rows()) + "x" +
              std::to_string(soft.weights.cols()) + " does not match token grid " +
              std::to_string(t.height()) + "x" + std::to_string(t.width()));
  double total = 0.0;
  for (double w : soft.weights.data()) total += w;
  if (!(total > kDegenerateWeight))
    fail(ErrorKind::kDegenerateMask, "soft mask weight sum " + std::to_string(total) +
                                         " is degenerate");

  std::vector<double> pooled(t.dim(), 0.0);
  for (std::size_t y = 0; y < t.height(); ++y) {
    for (std::size_t x = 0; x < t.width(); ++x) {
      const double w = soft.weights(y, x);
      if (w == 0.0) continue;
      const auto f = t.pixel(y, x);
      for (std::size_t c = 0; c < t.dim(); ++c) pooled[c] += w * f[c];
    }
  }
  for (double& v : pooled) v /= total;
  return pooled;
}

}  // namespace liftseg
