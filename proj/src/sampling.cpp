#include "compc/sampling.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "compc/error.hpp"

namespace compc {

std::vector<std::size_t> farthest_point_indices(std::span<const Vec3> points, std::size_t n, std::uint64_t seed) {
  require(n <= points.size(), "farthest_point_sample: requested more points than available");
  std::vector<std::size_t> chosen;
  if (n == 0) return chosen;
  chosen.reserve(n);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  std::size_t current = pick(rng);

  std::vector<double> min_d2(points.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(points.size(), false);
  for (std::size_t k = 0; k < n; ++k) {
    chosen.push_back(current);
    taken[current] = true;
    const Vec3 c = points[current];
    std::size_t next = 0;
    double next_d2 = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d2 = (points[i] - c).squaredNorm();
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (!taken[i] && min_d2[i] > next_d2) {
        next_d2 = min_d2[i];
        next = i;
      }
    }
    current = next;
  }
  return chosen;
}

std::vector<Vec3> farthest_point_sample(std::span<const Vec3> points, std::size_t n, std::uint64_t seed) {
  std::vector<Vec3> out;
  out.reserve(n);
  for (auto i : farthest_point_indices(points, n, seed)) out.push_back(points[i]);
  return out;
}

PointCloud farthest_point_sample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  const auto idx = farthest_point_indices(cloud.points, n, seed);
  return cloud.subset(idx);
}

std::vector<Vec3> fibonacci_sphere(std::size_t n) {
  std::vector<Vec3> out;
  out.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

std::vector<Vec3> random_sphere_points(std::size_t n, std::uint64_t seed, double radius) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vec3> out;
  out.reserve(n);
  while (out.size() < n) {
    Vec3 v(normal(rng), normal(rng), normal(rng));
    const double len = v.norm();
    if (len < 1e-12) continue;
    out.push_back(radius * v / len);
  }
  return out;
}

std::vector<Vec3> random_ball_points(std::size_t n, std::uint64_t seed, double radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  while (out.size() < n) {
    Vec3 v(u(rng), u(rng), u(rng));
    if (v.squaredNorm() <= 1.0) out.push_back(radius * v);
  }
  return out;
}

}  // namespace compc
