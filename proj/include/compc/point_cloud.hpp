#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace compc {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

// Ordered 3D points with optional per-point unit normals.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty, or one per point

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {}
  PointCloud(std::vector<Vec3> pts, std::vector<Vec3> nrm) : points(std::move(pts)), normals(std::move(nrm)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  // Throws PreconditionError when the invariants (finite coords, unit normals,
  // matching lengths, non-empty) do not hold.
  void validate() const;

  PointCloud subset(std::span<const std::size_t> indices) const;
};

struct Aabb {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();

  static Aabb of(std::span<const Vec3> points);

  Vec3 center() const { return 0.5 * (min_corner + max_corner); }
  Vec3 extent() const { return max_corner - min_corner; }
  double diagonal() const { return extent().norm(); }
  // Grows every side by `fraction` of the corresponding extent.
  Aabb padded(double fraction) const;
  bool contains(const Vec3& p) const;
};

// p -> (p - center) * scale, and its exact inverse.
struct Similarity {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
  Vec3 invert(const Vec3& p) const { return p / scale + center; }
  PointCloud apply(const PointCloud& cloud) const;
  PointCloud invert(const PointCloud& cloud) const;
};

// Centers the cloud's bounding box at the origin and scales its longest side to 1,
// so the result fits [-0.5, 0.5]^3. Throws DegenerateError when all points coincide.
std::pair<PointCloud, Similarity> normalize_unit_box(const PointCloud& cloud);

std::vector<Vec3> concat(std::span<const Vec3> a, std::span<const Vec3> b);

}  // namespace compc
