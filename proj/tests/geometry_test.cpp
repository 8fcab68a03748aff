// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "liftseg/error.hpp"
#include "liftseg/geometry.hpp"
#include "liftseg/reference.hpp"
#include "support.hpp"

namespace liftseg {
namespace {

using testing::Gen;

Mat3 pinhole(double f, double cx, double cy) {
  Mat3 k{};
  k[0][0] = f;
  k[1][1] = f;
  k[0][2] = cx;
  k[1][2] = cy;
  k[2][2] = 1.0;
  return k;
}

CameraView vga_view() { return CameraView(pinhole(500, 320, 240), identity4(), Matrix(480, 640, 1.0)); }

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::kIo;
}

TEST(Backproject, IdentityCamera) {
  const CameraView view(identity3(), identity4(), Matrix(1, 1, 1.0));
  EXPECT_EQ(backproject_pixel(view, 0, 0, 1), (Vec3{0, 0, 1}));
}

TEST(Backproject, PrincipalRay) {
  EXPECT_EQ(backproject_pixel(vga_view(), 320, 240, 2), (Vec3{0, 0, 2}));
}

TEST(Backproject, OffAxisMatchesLinearSolve) {
  // K^-1 (u d, v d, d) solved by elimination: x = (420 - 320) * 2 / 500.
  const Vec3 p = backproject_pixel(vga_view(), 420, 240, 2);
  EXPECT_NEAR(p.x, 0.4, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
  EXPECT_NEAR(p.z, 2.0, 1e-12);
  const auto solved = reference::solve3(pinhole(500, 320, 240), {420.0 * 2, 240.0 * 2, 2.0});
  EXPECT_NEAR(p.x, solved[0], 1e-12);
}

TEST(Backproject, Errors) {
  const CameraView view = vga_view();
  EXPECT_EQ(kind_of([&] { backproject_pixel(view, 1, 1, 0.0); }), ErrorKind::kInvalidDepth);
  EXPECT_EQ(kind_of([&] { backproject_pixel(view, 1, 1, -1.0); }), ErrorKind::kInvalidDepth);
  EXPECT_EQ(kind_of([&] { backproject_pixel(view, 640, 1, 1.0); }), ErrorKind::kBounds);
  EXPECT_EQ(kind_of([&] { backproject_pixel(view, 1, -0.5, 1.0); }), ErrorKind::kBounds);
}

TEST(Backproject, RandomCamerasMatchReference) {
  Gen g(11);
  for (int c = 0; c < 50; ++c) {
    const CameraView view = testing::random_camera(g, 30, 40);
    const double u = g.uniform(0, 39), v = g.uniform(0, 29), d = g.uniform(0.1, 20);
    const Vec3 a = backproject_pixel(view, u, v, d);
    const Vec3 b = reference::backproject_pixel(view, u, v, d);
    EXPECT_LT(std::sqrt(squared_distance(a, b)), 1e-9);
  }
}

TEST(Project, Identity) {
  const CameraView view(identity3(), identity4(), Matrix(1, 1, 1.0));
  const PixelProjection p = project_point(view, {0, 0, 1});
  EXPECT_EQ(p.u, 0.0);
  EXPECT_EQ(p.v, 0.0);
  EXPECT_EQ(p.depth, 1.0);
}

TEST(Project, OffAxis) {
  const PixelProjection p = project_point(vga_view(), {0.4, 0, 2});
  EXPECT_NEAR(p.u, 420, 1e-9);
  EXPECT_NEAR(p.v, 240, 1e-9);
  EXPECT_NEAR(p.depth, 2, 1e-12);
}

TEST(Project, BehindCamera) {
  EXPECT_EQ(kind_of([] { project_point(vga_view(), {0, 0, -1}); }), ErrorKind::kBehindCamera);
  EXPECT_EQ(kind_of([] { project_point(vga_view(), {0, 0, 0}); }), ErrorKind::kBehindCamera);
}

TEST(Project, RoundTripProperty) {
  Gen g(12);
  for (int c = 0; c < 200; ++c) {
    const CameraView view = testing::random_camera(g, 48, 64);
    const Vec3 p = backproject_pixel(view, g.uniform(0, 63), g.uniform(0, 47), g.uniform(0.2, 30));
    const PixelProjection px = project_point(view, p);
    EXPECT_LT(std::sqrt(squared_distance(backproject_pixel(view, px.u, px.v, px.depth), p)), 1e-9);
    const PixelProjection ref = reference::project_point(view, p);
    EXPECT_NEAR(px.u, ref.u, 1e-7);
    EXPECT_NEAR(px.v, ref.v, 1e-7);
  }
}

TEST(CameraView, RejectsInvalidInputs) {
  Mat3 bad_k = pinhole(500, 320, 240);
  bad_k[0][0] = -1;
  EXPECT_EQ(kind_of([&] { CameraView(bad_k, identity4(), Matrix(2, 2)); }), ErrorKind::kValidation);
  Mat4 reflect = identity4();
  reflect[0][0] = -1;
  EXPECT_EQ(kind_of([&] { CameraView(pinhole(1, 0, 0), reflect, Matrix(2, 2)); }),
            ErrorKind::kValidation);
  Mat4 scaled = identity4();
  scaled[1][1] = 2;
  EXPECT_EQ(kind_of([&] { CameraView(pinhole(1, 0, 0), scaled, Matrix(2, 2)); }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([&] { CameraView(pinhole(1, 0, 0), identity4(), Matrix(2, 2, -1.0)); }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([&] { CameraView(pinhole(1, 0, 0), identity4(), Matrix(2, 2, NAN)); }),
            ErrorKind::kValidation);
}

TEST(BackprojectView, EmptyDepth) {
  const CameraView view(pinhole(10, 2, 2), identity4(), Matrix(4, 4, 0.0));
  EXPECT_TRUE(backproject_view(view).empty());
}

TEST(BackprojectView, SinglePixel) {
  Matrix depth(4, 5, 0.0);
  depth(2, 3) = 1.5;
  const CameraView view(pinhole(10, 2, 2), identity4(), depth);
  const auto lifted = backproject_view(view);
  ASSERT_EQ(lifted.size(), 1u);
  EXPECT_EQ(lifted[0].pixel, 2u * 5 + 3);
  EXPECT_EQ(lifted[0].position, backproject_pixel(view, 3, 2, 1.5));
}

TEST(BackprojectView, MatchesPerPixelLoop) {
  Gen g(13);
  for (int c = 0; c < 10; ++c) {
    Matrix depth(8, 8);
    for (double& d : depth.data()) d = g.uniform() < 0.3 ? 0.0 : g.uniform(0.5, 4);
    const CameraView view = testing::random_camera(g, 8, 8, depth);
    const auto fast = backproject_view(view);
    const auto slow = reference::backproject_view(view);
    ASSERT_EQ(fast.size(), slow.size());
    std::size_t k = 0;
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        if (depth(y, x) <= 0) continue;
        EXPECT_EQ(fast[k].pixel, y * 8 + x);
        EXPECT_EQ(fast[k].position, backproject_pixel(view, static_cast<double>(x),
                                                      static_cast<double>(y), depth(y, x)));
        EXPECT_EQ(fast[k].pixel, slow[k].pixel);
        EXPECT_LT(squared_distance(fast[k].position, slow[k].position), 1e-18);
        ++k;
      }
  }
}

TEST(RadiusQuery, Trivial) {
  const SpatialIndex index({{0, 0, 0}}, 0.3);
  EXPECT_EQ(index.radius_query({0, 0, 0}, 0.01), (std::vector<std::uint32_t>{0}));
  const SpatialIndex two({{0.5, 0, 0}, {1.5, 0, 0}}, 1.0);
  EXPECT_EQ(two.radius_query({0, 0, 0}, 1.0), (std::vector<std::uint32_t>{0}));
  EXPECT_TRUE(two.radius_query({100, 100, 100}, 1.0).empty());
}

TEST(RadiusQuery, BoundaryIsInclusive) {
  const SpatialIndex index({{1, 0, 0}, {0, 0, 0}}, 0.25);
  EXPECT_EQ(index.radius_query({0, 0, 0}, 1.0), (std::vector<std::uint32_t>{0, 1}));
}

TEST(RadiusQuery, MatchesScanAcrossCellSizes) {
  Gen g(14);
  std::vector<Vec3> pts(1000);
  for (auto& p : pts) p = g.point(-1, 1);
  for (double cell : {0.03, 0.1, 0.5, 3.0}) {
    const SpatialIndex index = build_index(pts, cell);
    std::vector<Vec3> centers;
    for (int q = 0; q < 100; ++q) centers.push_back(g.point(-1.2, 1.2));
    const auto batch = radius_query_batch(index, centers, 0.1);
    for (std::size_t q = 0; q < centers.size(); ++q) {
      const auto expect = reference::radius_scan(pts, centers[q], 0.1);
      EXPECT_EQ(radius_query(index, centers[q], 0.1), expect);
      EXPECT_EQ(batch[q], expect);
    }
  }
}

TEST(RadiusQuery, Errors) {
  EXPECT_EQ(kind_of([] { build_index({{0, 0, 0}}, 0.0); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { build_index({{0, 0, 0}}, -1.0); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { build_index({{0, 0, 0}}, 1.0).radius_query({0, 0, 0}, 0.0); }),
            ErrorKind::kConfig);
}

TEST(RadiusQuery, CellMembersGroupPoints) {
  const SpatialIndex index({{0.1, 0.1, 0.1}, {5, 5, 5}, {0.2, 0.3, 0.4}}, 1.0);
  EXPECT_EQ(index.cell_members({0.5, 0.5, 0.5}), (std::vector<std::uint32_t>{0, 2}));
  EXPECT_EQ(index.cell_count(), 2u);
  EXPECT_TRUE(index.cell_members({-3, 0, 0}).empty());
}

TEST(Fps, Trivial) {
  Gen g(15);
  std::vector<Vec3> pts(10);
  for (auto& p : pts) p = g.point(0, 1);
  EXPECT_EQ(farthest_point_sampling(pts, 1, 7), (std::vector<std::size_t>{7}));
  std::vector<Vec3> line;
  for (int i = 0; i < 10; ++i) line.push_back({static_cast<double>(i), 0, 0});
  EXPECT_EQ(farthest_point_sampling(line, 2, 0), (std::vector<std::size_t>{0, 9}));
}

TEST(Fps, TiesGoToSmallestIndex) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}};
  EXPECT_EQ(farthest_point_sampling(pts, 3, 0), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Fps, Errors) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}};
  EXPECT_EQ(kind_of([&] { farthest_point_sampling(pts, 3, 0); }), ErrorKind::kSize);
  EXPECT_EQ(kind_of([&] { farthest_point_sampling(pts, 0, 0); }), ErrorKind::kSize);
  EXPECT_EQ(kind_of([&] { farthest_point_sampling(pts, 1, 2); }), ErrorKind::kBounds);
}

TEST(Fps, Properties) {
  Gen g(16);
  for (int c = 0; c < 30; ++c) {
    std::vector<Vec3> pts(50);
    for (auto& p : pts) p = g.point(-1, 1);
    const auto k = g.index(1, 50);
    const auto seed = g.index(0, 49);
    const auto picked = farthest_point_sampling(pts, k, seed);
    EXPECT_EQ(picked.size(), k);
    EXPECT_EQ(picked.front(), seed);
    auto sorted = picked;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    EXPECT_EQ(picked, reference::farthest_point_sampling(pts, k, seed));
  }
}

TEST(Visibility, DepthConsistency) {
  Matrix depth(480, 640, 2.0);
  const CameraView view(pinhole(500, 320, 240), identity4(), depth);
  EXPECT_TRUE(visibility_check(view, {0, 0, 2.01}));
  EXPECT_FALSE(visibility_check(view, {0, 0, 2.5}));   // occluded
  EXPECT_FALSE(visibility_check(view, {0, 0, -2}));    // behind
  EXPECT_FALSE(visibility_check(view, {50, 0, 2}));    // outside the image
  Matrix holes(480, 640, 0.0);
  const CameraView empty(pinhole(500, 320, 240), identity4(), holes);
  EXPECT_FALSE(visibility_check(empty, {0, 0, 0}));
  EXPECT_FALSE(visibility_check(empty, {0, 0, 1}));    // invalid depth
}

TEST(Visibility, MatchesReference) {
  Gen g(17);
  for (int c = 0; c < 200; ++c) {
    Matrix depth(20, 30);
    for (double& d : depth.data()) d = g.uniform() < 0.2 ? 0.0 : g.uniform(1, 3);
    const CameraView view = testing::random_camera(g, 20, 30, depth);
    const Vec3 p = view.camera_to_world({g.uniform(-2, 2), g.uniform(-2, 2), g.uniform(-0.5, 3.5)});
    EXPECT_EQ(visibility_check(view, p, 0.3), reference::visibility_check(view, p, 0.3));
  }
}

}  // namespace
}  // namespace liftseg
