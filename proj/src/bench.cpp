// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/bench.hpp"

#include <chrono>
#include <random>

#include "liftseg/error.hpp"
#include "liftseg/geometry.hpp"
#include "liftseg/reference.hpp"

namespace liftseg {

IndexBenchReport bench_index(std::size_t n_points, std::size_t n_queries, double radius,
                             std::uint64_t seed) {
  require(n_points >= 1 && n_queries >= 1, ErrorKind::kSize, "bench needs points and queries");
  require(radius > 0.0, ErrorKind::kConfig, "bench radius must be positive");
  std::mt19937_64 rng(seed);
  const auto draw = [&] { return 4.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<Vec3> points(n_points);
  for (auto& p : points) p = {draw(), draw(), draw()};
  std::vector<Vec3> centers(n_queries);
  for (auto& c : centers) c = {draw(), draw(), draw()};

  using Clock = std::chrono::steady_clock;
  IndexBenchReport r{n_points, n_queries, radius};
  std::vector<std::vector<std::uint32_t>> grid(n_queries);
  const auto t0 = Clock::now();
  const SpatialIndex index(points, radius);
  for (std::size_t q = 0; q < n_queries; ++q) grid[q] = index.radius_query(centers[q], radius);
  const auto t1 = Clock::now();
  std::vector<std::vector<std::uint32_t>> brute(n_queries);
  for (std::size_t q = 0; q < n_queries; ++q)
    brute[q] = reference::radius_scan(points, centers[q], radius);
  const auto t2 = Clock::now();

  r.grid_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.brute_seconds = std::chrono::duration<double>(t2 - t1).count();
  r.speedup = r.brute_seconds / std::max(r.grid_seconds, 1e-12);
  r.identical = grid == brute;
  for (const auto& g : grid) r.total_hits += g.size();
  require(r.identical, ErrorKind::kValidation, "grid and brute-force radius queries disagree");
  return r;
}

nlohmann::json to_json(const IndexBenchReport& r) {
  return {{"n_points", r.n_points},         {"n_queries", r.n_queries},
          {"radius", r.radius},             {"grid_seconds", r.grid_seconds},
          {"brute_seconds", r.brute_seconds}, {"speedup", r.speedup},
          {"total_hits", r.total_hits},     {"identical", r.identical}};
}

}  // namespace liftseg
