#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "compc/kdtree.hpp"
#include "compc/point_cloud.hpp"

namespace compc {

// Distance from every point of `from` to its nearest point in `to`.
std::vector<double> directed_distances(std::span<const Vec3> from, const KdTree& to);
std::vector<double> directed_distances(std::span<const Vec3> from, std::span<const Vec3> to);

// L1 Chamfer distance, halved-sum convention:
//   0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|)
double chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b);
double chamfer_l1(const PointCloud& a, const PointCloud& b);
// Same value, reusing prebuilt indexes of both clouds.
double chamfer_l1(const KdTree& a, const KdTree& b);

struct ChamferGradient {
  double value = 0.0;
  std::vector<Vec3> d_a;  // d value / d a_i; nearest-neighbour assignment held constant
};

// chamfer_l1 together with its gradient with respect to the points of `a`.
// Coincident pairs contribute a zero subgradient.
ChamferGradient chamfer_l1_with_grad(std::span<const Vec3> a, std::span<const Vec3> b);
ChamferGradient chamfer_l1_with_grad(std::span<const Vec3> a, std::span<const Vec3> b, const KdTree& b_tree);

// Per-point distance to the closest *other* point. Requires >= 2 points.
std::vector<double> nearest_neighbor_distances(std::span<const Vec3> points);
std::vector<double> nearest_neighbor_distances(const PointCloud& cloud);
double mean_nearest_neighbor_distance(std::span<const Vec3> points);

struct EmdOptions {
  std::size_t sample_size = 2048;
  std::uint64_t seed = 0;
  // Final auction epsilon as a fraction of the joint bounding-box diagonal.
  double epsilon_fraction = 1e-3;
};

// Approximate Earth Mover's Distance: both clouds are brought to a common size
// (farthest-point subsampling above the sample size, seeded duplication below),
// then an epsilon-scaling auction finds a near-optimal one-to-one assignment.
// Returns the mean per-point transport cost.
double emd_approx(std::span<const Vec3> a, std::span<const Vec3> b, const EmdOptions& options = {});
double emd_approx(const PointCloud& a, const PointCloud& b, const EmdOptions& options = {});

// Auction assignment on equal-size sets; returns assignment[i] = matched index in b.
// Mean cost is within `epsilon` of optimal.
std::vector<std::size_t> auction_assignment(std::span<const Vec3> a, std::span<const Vec3> b, double epsilon);

}  // namespace compc
