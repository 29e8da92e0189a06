#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library routines it is used to check.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace oracle {

inline bool within_slo(double alpha, double beta, double slo, std::uint64_t c) {
  return alpha * static_cast<double>(c) + beta <= slo + 1e-9;
}

/// Largest C in [0, limit] such that every concurrency 1..C meets the SLO.
inline std::uint64_t brute_force_depth(double alpha, double beta, double slo,
                                       std::uint64_t limit) {
  std::uint64_t best = 0;
  for (std::uint64_t c = 1; c <= limit; ++c) {
    if (!within_slo(alpha, beta, slo, c)) break;
    best = c;
  }
  return best;
}

/// Least squares via the raw 2x2 normal equations (no centering).
inline std::pair<double, double> normal_equations_fit(
    const std::vector<std::pair<double, double>>& points) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double det = n * sxx - sx * sx;
  const double slope = (n * sxy - sx * sy) / det;
  const double intercept = (sxx * sy - sx * sxy) / det;
  return {slope, intercept};
}

}  // namespace oracle
