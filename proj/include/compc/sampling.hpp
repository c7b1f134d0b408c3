#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "compc/point_cloud.hpp"

namespace compc {

// Farthest point sampling. The first index is drawn from `seed`; every further
// pick maximises the distance to the already chosen set (ties: lowest index).
std::vector<std::size_t> farthest_point_indices(std::span<const Vec3> points, std::size_t n, std::uint64_t seed);
std::vector<Vec3> farthest_point_sample(std::span<const Vec3> points, std::size_t n, std::uint64_t seed);
PointCloud farthest_point_sample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

// n unit vectors on the golden-angle spiral (z from 1-1/n down to -1+1/n).
std::vector<Vec3> fibonacci_sphere(std::size_t n);

std::vector<Vec3> random_sphere_points(std::size_t n, std::uint64_t seed, double radius = 1.0);
std::vector<Vec3> random_ball_points(std::size_t n, std::uint64_t seed, double radius = 1.0);

}  // namespace compc
