#include "adar/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "adar/error.hpp"

namespace adar {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Matrix plus_plus_seed(const Matrix& X, std::size_t k, std::mt19937_64& rng) {
  const auto n = X.rows();
  Matrix centers(0, X.cols());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.append_row(X.row(pick(rng)));

  std::vector<double> d2(n);
  for (std::size_t r = 0; r < n; ++r) d2[r] = sq_dist(X.row(r), centers.row(0));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.rows() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t r = 0; r < n; ++r) {
        acc += d2[r];
        if (acc > target && d2[r] > 0.0) {
          chosen = r;
          break;
        }
      }
    }
    // total == 0: every point coincides with a center; duplicates are unavoidable
    centers.append_row(X.row(chosen));
    const auto c = centers.rows() - 1;
    for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], sq_dist(X.row(r), centers.row(c)));
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Matrix& X, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("kmeans: k must be at least 1");
  if (X.rows() < k) {
    throw ConfigError("kmeans: " + std::to_string(X.rows()) + " points cannot form " + std::to_string(k) +
                      " clusters");
  }
  const auto n = X.rows();
  const auto d = X.cols();
  std::mt19937_64 rng(seed);

  KMeansResult res;
  res.centers = plus_plus_seed(X, k, rng);
  res.assignments.assign(n, std::numeric_limits<std::size_t>::max());
  std::vector<double> dist(n);

  for (std::size_t iter = 0; iter < kKMeansMaxIterations; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = sq_dist(X.row(r), res.centers.row(c));
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (res.assignments[r] != best) {
        res.assignments[r] = best;
        changed = true;
      }
      dist[r] = best_d;
      inertia += best_d;
    }
    res.inertia_history.push_back(inertia);
    res.inertia = inertia;
    res.iterations = iter + 1;
    if (!changed && iter > 0) break;

    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto c = res.assignments[r];
      ++counts[c];
      for (std::size_t i = 0; i < d; ++i) sums(c, i) += X(r, i);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t i = 0; i < d; ++i) res.centers(c, i) = sums(c, i) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: take over the point worst served by its own center.
      std::size_t far = 0;
      for (std::size_t r = 1; r < n; ++r) {
        if (dist[r] > dist[far]) far = r;
      }
      std::ranges::copy(X.row(far), res.centers.row(c).begin());
      dist[far] = 0.0;
    }
  }
  return res;
}

}  // namespace adar
