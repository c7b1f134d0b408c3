#include "compc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>

#include "compc/error.hpp"
#include "compc/sampling.hpp"

namespace compc {

std::vector<double> directed_distances(std::span<const Vec3> from, const KdTree& to) {
  std::vector<double> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = std::sqrt(to.nearest(from[i]).distance_sq);
  return out;
}

std::vector<double> directed_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  return directed_distances(from, KdTree(to));
}

namespace {

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b) {
  require(!a.empty() && !b.empty(), "chamfer_l1: empty input");
  const KdTree ta(a), tb(b);
  return 0.5 * (mean(directed_distances(a, tb)) + mean(directed_distances(b, ta)));
}

double chamfer_l1(const PointCloud& a, const PointCloud& b) { return chamfer_l1(a.points, b.points); }

double chamfer_l1(const KdTree& a, const KdTree& b) {
  require(a.size() > 0 && b.size() > 0, "chamfer_l1: empty input");
  return 0.5 * (mean(directed_distances(a.points(), b)) + mean(directed_distances(b.points(), a)));
}

ChamferGradient chamfer_l1_with_grad(std::span<const Vec3> a, std::span<const Vec3> b) {
  return chamfer_l1_with_grad(a, b, KdTree(b));
}

ChamferGradient chamfer_l1_with_grad(std::span<const Vec3> a, std::span<const Vec3> b, const KdTree& b_tree) {
  require(!a.empty() && !b.empty(), "chamfer_l1_with_grad: empty input");
  ChamferGradient out;
  out.d_a.assign(a.size(), Vec3::Zero());
  const double wa = 0.5 / static_cast<double>(a.size());
  const double wb = 0.5 / static_cast<double>(b.size());

  double sum_a = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto hit = b_tree.nearest(a[i]);
    const double d = std::sqrt(hit.distance_sq);
    sum_a += d;
    if (d > 0.0) out.d_a[i] += wa * (a[i] - b[hit.index]) / d;
  }
  const KdTree a_tree(a);
  double sum_b = 0.0;
  for (const auto& q : b) {
    const auto hit = a_tree.nearest(q);
    const double d = std::sqrt(hit.distance_sq);
    sum_b += d;
    if (d > 0.0) out.d_a[hit.index] += wb * (a[hit.index] - q) / d;
  }
  out.value = wa * sum_a + wb * sum_b;
  return out;
}

std::vector<double> nearest_neighbor_distances(std::span<const Vec3> points) {
  require(points.size() >= 2, "nearest_neighbor_distances: needs at least 2 points");
  const KdTree tree(points);
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = std::sqrt(tree.nearest(points[i], i).distance_sq);
  return out;
}

std::vector<double> nearest_neighbor_distances(const PointCloud& cloud) { return nearest_neighbor_distances(cloud.points); }

double mean_nearest_neighbor_distance(std::span<const Vec3> points) { return mean(nearest_neighbor_distances(points)); }

std::vector<std::size_t> auction_assignment(std::span<const Vec3> a, std::span<const Vec3> b, double epsilon) {
  const std::size_t n = a.size();
  require(n == b.size(), "auction_assignment: size mismatch");
  require(epsilon > 0.0, "auction_assignment: epsilon must be positive");
  if (n == 0) return {};

  // cost[i*n + j]; benefit is its negation.
  std::vector<double> cost(n * n);
  double max_cost = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double c = (a[i] - b[j]).norm();
      cost[i * n + j] = c;
      max_cost = std::max(max_cost, c);
    }

  // Total cost ends within n * eps of optimal, i.e. mean cost within eps.
  std::vector<double> price(n, 0.0);
  std::vector<std::size_t> owner(n), assigned(n);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  double eps = std::max(max_cost / 4.0, epsilon);
  while (true) {
    std::fill(owner.begin(), owner.end(), kNone);
    std::fill(assigned.begin(), assigned.end(), kNone);
    std::deque<std::size_t> unassigned(n);
    std::iota(unassigned.begin(), unassigned.end(), std::size_t{0});

    while (!unassigned.empty()) {
      const std::size_t i = unassigned.front();
      unassigned.pop_front();
      const double* row = &cost[i * n];
      double best = -std::numeric_limits<double>::infinity(), second = best;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double value = -row[j] - price[j];
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      const double increment = (n == 1 ? 0.0 : best - second) + eps;
      price[best_j] += increment;
      if (owner[best_j] != kNone) {
        assigned[owner[best_j]] = kNone;
        unassigned.push_back(owner[best_j]);
      }
      owner[best_j] = i;
      assigned[i] = best_j;
    }
    if (eps <= epsilon) break;
    eps = std::max(eps / 5.0, epsilon);
  }
  return assigned;
}

namespace {

std::vector<Vec3> resize_for_emd(std::span<const Vec3> pts, std::size_t target, std::uint64_t seed) {
  if (pts.size() == target) return {pts.begin(), pts.end()};
  if (pts.size() > target) return farthest_point_sample(pts, target, seed);
  std::vector<Vec3> out(pts.begin(), pts.end());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  while (out.size() < target) out.push_back(pts[pick(rng)]);
  return out;
}

}  // namespace

double emd_approx(std::span<const Vec3> a, std::span<const Vec3> b, const EmdOptions& options) {
  require(!a.empty() && !b.empty(), "emd_approx: empty input");
  require(options.sample_size >= 1, "emd_approx: sample size must be >= 1");
  const std::size_t target = std::min(options.sample_size, std::max(a.size(), b.size()));
  const auto ra = resize_for_emd(a, target, options.seed);
  const auto rb = resize_for_emd(b, target, options.seed + 1);
  if (ra.size() != rb.size()) throw Error("emd_approx: internal size mismatch after resampling");

  Aabb box = Aabb::of(ra);
  const Aabb bb = Aabb::of(rb);
  box.min_corner = box.min_corner.cwiseMin(bb.min_corner);
  box.max_corner = box.max_corner.cwiseMax(bb.max_corner);
  const double diag = box.diagonal();
  if (diag == 0.0) return 0.0;

  const auto assignment = auction_assignment(ra, rb, options.epsilon_fraction * diag);
  double total = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) total += (ra[i] - rb[assignment[i]]).norm();
  return total / static_cast<double>(ra.size());
}

double emd_approx(const PointCloud& a, const PointCloud& b, const EmdOptions& options) {
  return emd_approx(a.points, b.points, options);
}

}  // namespace compc
