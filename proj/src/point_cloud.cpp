#include "compc/point_cloud.hpp"

#include <cmath>
#include <string>

#include "compc/error.hpp"

namespace compc {

void PointCloud::validate() const {
  require(!points.empty(), "point cloud is empty");
  require(normals.empty() || normals.size() == points.size(), "normals/points length mismatch");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(points[i].allFinite(), "non-finite coordinate at index " + std::to_string(i));
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    require(std::abs(normals[i].norm() - 1.0) <= 1e-4, "non-unit normal at index " + std::to_string(i));
  }
}

PointCloud PointCloud::subset(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.points.reserve(indices.size());
  for (auto i : indices) out.points.push_back(points.at(i));
  if (has_normals()) {
    out.normals.reserve(indices.size());
    for (auto i : indices) out.normals.push_back(normals.at(i));
  }
  return out;
}

Aabb Aabb::of(std::span<const Vec3> points) {
  require(!points.empty(), "bounding box of empty point set");
  Aabb box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min_corner = box.min_corner.cwiseMin(p);
    box.max_corner = box.max_corner.cwiseMax(p);
  }
  return box;
}

Aabb Aabb::padded(double fraction) const {
  const Vec3 pad = extent() * fraction;
  return {min_corner - pad, max_corner + pad};
}

bool Aabb::contains(const Vec3& p) const {
  return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
}

PointCloud Similarity::apply(const PointCloud& cloud) const {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(apply(p));
  out.normals = cloud.normals;  // uniform scale keeps directions
  return out;
}

PointCloud Similarity::invert(const PointCloud& cloud) const {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(invert(p));
  out.normals = cloud.normals;
  return out;
}

std::pair<PointCloud, Similarity> normalize_unit_box(const PointCloud& cloud) {
  require(!cloud.empty(), "normalize_unit_box: empty cloud");
  const Aabb box = Aabb::of(cloud.points);
  const double longest = box.extent().maxCoeff();
  if (!(longest > 0.0)) throw DegenerateError("normalize_unit_box: degenerate extent (all points identical)");
  Similarity t{box.center(), 1.0 / longest};
  return {t.apply(cloud), t};
}

std::vector<Vec3> concat(std::span<const Vec3> a, std::span<const Vec3> b) {
  std::vector<Vec3> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace compc
