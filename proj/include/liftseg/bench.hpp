// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_BENCH_HPP
#define LIFTSEG_BENCH_HPP

#include <cstdint>

#include "json.hpp"

namespace liftseg {

struct IndexBenchReport {
  std::size_t n_points = 0;
  std::size_t n_queries = 0;
  double radius = 0.0;
  double grid_seconds = 0.0;  // index build plus all queries, single thread
  double brute_seconds = 0.0;
  double speedup = 0.0;
  std::size_t total_hits = 0;
  bool identical = false;
};

/// Points uniform in a 4 m cube; query centers drawn from the same box.
/// Throws kValidation if the two result sets differ.
IndexBenchReport bench_index(std::size_t n_points, std::size_t n_queries, double radius,
                             std::uint64_t seed);

nlohmann::json to_json(const IndexBenchReport& report);

}  // namespace liftseg

#endif  // LIFTSEG_BENCH_HPP
