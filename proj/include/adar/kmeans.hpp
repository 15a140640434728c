#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "adar/matrix.hpp"

namespace adar {

struct KMeansResult {
  Matrix centers;                        // k x D
  std::vector<std::size_t> assignments;  // one cluster index per row
  double inertia = 0.0;                  // sum of squared distances to assigned centers
  std::vector<double> inertia_history;   // inertia after each assignment pass
  std::size_t iterations = 0;
};

inline constexpr std::size_t kKMeansMaxIterations = 300;

/// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed.
/// Empty clusters are re-seeded at the point farthest from its own center.
/// Throws ConfigError when X has fewer rows than k or k == 0.
KMeansResult kmeans(const Matrix& X, std::size_t k, std::uint64_t seed);

}  // namespace adar
