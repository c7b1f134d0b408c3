#include "compc/gaussians.hpp"

#include <algorithm>

#include "compc/error.hpp"
#include "compc/metrics.hpp"
#include "compc/normals.hpp"

namespace compc {

BinarizedOpacity binarize_opacity(double logit, double delta) {
  const double s = sigmoid(logit);
  // round(s) - s carries no gradient: value = stop(round(s) - s) + s
  return {s > 0.5 ? 1.0 : delta, s * (1.0 - s)};
}

std::vector<Vec3> colorize_by_normals(const PointCloud& cloud) {
  require(cloud.has_normals(), "colorize_by_normals: cloud has no normals");
  std::vector<Vec3> colors;
  colors.reserve(cloud.size());
  for (const auto& n : cloud.normals) colors.push_back((Vec3::Ones() + n) / 2.0);
  return colors;
}

void GaussianSet::validate() const {
  require(scale > 0.0 && std::isfinite(scale), "GaussianSet: scale must be positive and finite");
  require(opacity_logits.size() == centers.size() && colors.size() == centers.size(),
          "GaussianSet: attribute lengths differ");
  for (const auto& c : colors)
    require((c.array() >= 0.0).all() && (c.array() <= 1.0).all(), "GaussianSet: colour outside [0,1]");
  for (const auto& p : centers) require(p.allFinite(), "GaussianSet: non-finite centre");
}

GaussianSet input_gaussians(const PointCloud& cloud) {
  require(cloud.size() >= 2, "input_gaussians: need at least two points");
  GaussianSet g;
  g.centers = cloud.points;
  g.scale = mean_nearest_neighbor_distance(cloud.points);
  if (!(g.scale > 0.0)) throw DegenerateError("input_gaussians: all points coincide");
  g.opacity_logits.assign(cloud.size(), kOpaqueLogit);
  if (cloud.has_normals()) {
    g.colors = colorize_by_normals(cloud);
  } else {
    const std::size_t k = std::min<std::size_t>(30, cloud.size() - 1);
    g.colors = colorize_by_normals(estimate_normals(cloud, std::max<std::size_t>(k, 2)).cloud);
  }
  g.frozen = true;
  return g;
}

std::vector<Vec3> union_centers(std::span<const GaussianSet> sets) {
  std::vector<Vec3> out;
  for (const auto& s : sets) out.insert(out.end(), s.centers.begin(), s.centers.end());
  return out;
}

}  // namespace compc
