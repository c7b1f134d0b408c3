#pragma once

// Independent reference implementations used only by the tests. None of these
// share code paths with the library routines they check.

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "compc/point_cloud.hpp"

namespace compc::oracle {

inline double brute_directed_mean(std::span<const Vec3> from, std::span<const Vec3> to) {
  double sum = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (p - q).norm());
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

inline double brute_chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b) {
  return 0.5 * (brute_directed_mean(a, b) + brute_directed_mean(b, a));
}

inline std::vector<double> brute_nn_distances(std::span<const Vec3> pts) {
  std::vector<double> out(pts.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (i != j) out[i] = std::min(out[i], (pts[i] - pts[j]).norm());
  return out;
}

// Exact minimum-cost perfect matching (Hungarian / Kuhn-Munkres with potentials), O(n^3).
inline double brute_mean_nn(std::span<const Vec3> pts) {
  double sum = 0.0;
  for (double d : brute_nn_distances(pts)) sum += d;
  return sum / static_cast<double>(pts.size());
}

inline double hungarian_mean_cost(std::span<const Vec3> a, std::span<const Vec3> b) {
  const std::size_t n = a.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  auto cost = [&](std::size_t i, std::size_t j) { return (a[i - 1] - b[j - 1]).norm(); };
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost(p[j], j);
  return total / static_cast<double>(n);
}

inline std::vector<Vec3> uniform_cube(std::size_t n, std::uint64_t seed, double half = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

}  // namespace compc::oracle
