// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

// Test-only helpers: seeded generators and scalar oracles written from the
// equations, independent of both kernel sets.

#ifndef LIFTSEG_TESTS_SUPPORT_HPP
#define LIFTSEG_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "liftseg/fusion.hpp"
#include "liftseg/geometry.hpp"
#include "liftseg/imagefeat.hpp"
#include "liftseg/tensor.hpp"

namespace liftseg::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1));
  }
  double normal() {
    const double u1 = std::max(uniform(), 1e-300);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * uniform());
  }
  Matrix matrix(std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data()) v = scale * normal();
    return m;
  }
  Tensor3 tensor(std::size_t h, std::size_t w, std::size_t d) {
    Tensor3 t(h, w, d);
    for (double& v : t.data()) v = normal();
    return t;
  }
  Vec3 point(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }

 private:
  std::mt19937_64 engine_;
};

/// Random pinhole camera with a random rigid pose; depth map is filled later.
inline CameraView random_camera(Gen& g, std::size_t h, std::size_t w, Matrix depth = {}) {
  Mat3 k{};
  k[0][0] = g.uniform(50.0, 600.0);
  k[1][1] = g.uniform(50.0, 600.0);
  k[0][1] = g.uniform(-2.0, 2.0);
  k[0][2] = g.uniform(0.0, static_cast<double>(w));
  k[1][2] = g.uniform(0.0, static_cast<double>(h));
  k[2][2] = 1.0;
  // Rotation from a random unit quaternion.
  double q[4] = {g.normal(), g.normal(), g.normal(), g.normal()};
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& v : q) v /= n;
  const double a = q[0], b = q[1], c = q[2], d = q[3];
  Mat4 t = identity4();
  t[0] = {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c), g.uniform(-5, 5)};
  t[1] = {2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b), g.uniform(-5, 5)};
  t[2] = {2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d, g.uniform(-5, 5)};
  if (depth.empty()) depth = Matrix(h, w, 1.0);
  return CameraView(k, t, std::move(depth));
}

inline Matrix naive_linear(const Linear& l, const Matrix& x) {
  Matrix y(x.rows(), l.weight.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t o = 0; o < l.weight.rows(); ++o) {
      double acc = l.bias(0, o);
      for (std::size_t c = 0; c < x.cols(); ++c) acc += l.weight(o, c) * x(i, c);
      y(i, o) = acc;
    }
  return y;
}

inline Matrix naive_mlp(const Mlp2& m, const Matrix& x) {
  Matrix h = naive_linear(m.fc1, x);
  for (double& v : h.data()) v = std::max(v, 0.0);
  return naive_linear(m.fc2, h);
}

/// softmax(Q_h K_h^T / sqrt(d_h)) V_h per head, concatenated, then W_o.
inline Matrix naive_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                              const AttentionParams& p, std::size_t heads) {
  const Matrix q = naive_linear(p.query, queries);
  const Matrix k = naive_linear(p.key, keys);
  const Matrix v = naive_linear(p.value, values);
  const std::size_t d = q.cols();
  const std::size_t dh = d / heads;
  Matrix concat(q.rows(), d);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < q.rows(); ++i) {
      std::vector<double> s(k.rows());
      for (std::size_t j = 0; j < k.rows(); ++j) {
        double acc = 0.0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) acc += q(i, c) * k(j, c);
        s[j] = acc / std::sqrt(static_cast<double>(dh));
      }
      const double peak = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (double& e : s) z += (e = std::exp(e - peak));
      for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k.rows(); ++j) acc += s[j] / z * v(j, c);
        concat(i, c) = acc;
      }
    }
  }
  return naive_linear(p.output, concat);
}

inline Matrix naive_intra_fuse(const Matrix& dense, const Matrix& inst, const ParameterBundle& p) {
  Matrix q = naive_mlp(p.dense_mlp, dense);
  const Matrix kv = naive_mlp(p.instance_mlp, inst);
  const Matrix att = naive_attention(q, kv, kv, p.intra_attention, p.dims.heads);
  for (std::size_t i = 0; i < q.size(); ++i) q.data()[i] += att.data()[i];
  return q;
}

/// f = sum_xy w(x,y) T(x,y) / sum_xy w(x,y)
inline std::vector<double> naive_masked_pool(const Tensor3& tokens, const Matrix& w) {
  std::vector<double> f(tokens.dim(), 0.0);
  double total = 0.0;
  for (std::size_t y = 0; y < tokens.height(); ++y)
    for (std::size_t x = 0; x < tokens.width(); ++x) {
      total += w(y, x);
      for (std::size_t c = 0; c < tokens.dim(); ++c) f[c] += w(y, x) * tokens(y, x, c);
    }
  for (double& v : f) v /= total;
  return f;
}

/// Dense 2D Gaussian convolution with replicate padding, clamped to [0, 1].
inline Matrix naive_gaussian(const ByteImage& mask, double sigma) {
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  double total = 0.0;
  for (long i = -r; i <= r; ++i)
    for (long j = -r; j <= r; ++j) total += std::exp(-(i * i + j * j) / (2 * sigma * sigma));
  const long h = static_cast<long>(mask.height);
  const long w = static_cast<long>(mask.width);
  Matrix out(mask.height, mask.width);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i)
        for (long j = -r; j <= r; ++j) {
          const long sy = std::clamp(y + i, 0L, h - 1);
          const long sx = std::clamp(x + j, 0L, w - 1);
          acc += std::exp(-(i * i + j * j) / (2 * sigma * sigma)) / total *
                 mask.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
        }
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = std::clamp(acc, 0.0, 1.0);
    }
  return out;
}

/// Central differences of f at x with step h.
inline std::vector<double> numeric_gradient(const std::function<double(std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace liftseg::testing

#endif  // LIFTSEG_TESTS_SUPPORT_HPP
