// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_IMAGEFEAT_HPP
#define LIFTSEG_IMAGEFEAT_HPP

#include <vector>

#include "liftseg/tensor.hpp"

namespace liftseg {

/// Dense per-pixel features, H x W x D.
struct FeatureMap {
  Tensor3 values;
};

/// Patch tokens of an image encoder arranged on their G_h x G_w grid.
struct TokenGrid {
  Tensor3 values;
};

/// Binary instance mask with its quality scores.
struct InstanceMask {
  ByteImage mask;
  double pred_iou = 0.0;
  double stability = 0.0;
};

/// Per-pixel weights in [0,1] (rows = height).
struct SoftMask {
  Matrix weights;
};

inline constexpr double kDefaultThetaIou = 0.8;
inline constexpr double kDefaultThetaStability = 0.9;
inline constexpr double kDefaultSigma = 2.0;
inline constexpr double kDegenerateWeight = 1e-8;

/// Checks the InstanceMask invariants; throws kValidation.
void validate(const InstanceMask& mask);

std::vector<InstanceMask> filter_masks(const std::vector<InstanceMask>& masks,
                                       double theta_iou = kDefaultThetaIou,
                                       double theta_stab = kDefaultThetaStability);

/// Normalized 1D Gaussian taps, radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

SoftMask gaussian_soften(const InstanceMask& mask, double sigma = kDefaultSigma);
/// Same blur on an arbitrary real field (replicate padding, no clamping).
Matrix gaussian_blur(const Matrix& field, double sigma);

// Bilinear resampling, align-corners-false: src = (dst + 0.5) * in/out - 0.5,
// clamped to the valid range. Channels are resampled independently.
Tensor3 bilinear_resize(const Tensor3& grid, std::size_t out_h, std::size_t out_w);
Matrix bilinear_resize(const Matrix& grid, std::size_t out_h, std::size_t out_w);
inline SoftMask bilinear_resize(const SoftMask& mask, std::size_t out_h, std::size_t out_w) {
  return {bilinear_resize(mask.weights, out_h, out_w)};
}

FeatureMap upsample_features(const TokenGrid& tokens, std::size_t out_h, std::size_t out_w);

/// Soft-mask-weighted mean of the tokens. Throws kDegenerateMask when the
/// total weight is <= 1e-8.
std::vector<double> masked_pool(const TokenGrid& tokens, const SoftMask& soft);

}  // namespace liftseg

#endif  // LIFTSEG_IMAGEFEAT_HPP
