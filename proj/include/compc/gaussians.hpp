#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "compc/point_cloud.hpp"

namespace compc {

// Floor opacity for "off" Gaussians. Lower values make them hard to revive.
inline constexpr double kOpacityFloor = 0.01;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

struct BinarizedOpacity {
  double value = 0.0;    // forward opacity, exactly 1 or delta
  double d_logit = 0.0;  // d(value)/d(logit) under the straight-through rule
};

// Forward: 1 if sigmoid(logit) > 0.5, else delta. Backward: the rounding
// residual is treated as a constant, so the gradient is that of sigmoid(logit).
BinarizedOpacity binarize_opacity(double logit, double delta = kOpacityFloor);

// (1 + n) / 2 per component. Requires normals.
std::vector<Vec3> colorize_by_normals(const PointCloud& cloud);

// Isotropic, flat-coloured Gaussians sharing one scale.
struct GaussianSet {
  std::vector<Vec3> centers;
  double scale = 1.0;
  std::vector<double> opacity_logits;
  std::vector<Vec3> colors;
  bool frozen = false;

  std::size_t size() const { return centers.size(); }
  bool empty() const { return centers.empty(); }
  double opacity(std::size_t i, double delta = kOpacityFloor) const {
    return binarize_opacity(opacity_logits[i], delta).value;
  }
  void validate() const;
};

// Opaque, frozen Gaussians on the points of a cloud: opacity 1, colours from
// normals (estimated with k = min(30, n - 1) when absent), scale = mean
// nearest-neighbour distance. Needs at least two points.
GaussianSet input_gaussians(const PointCloud& cloud);

// Logit used for "on" Gaussians; sigmoid(kOpaqueLogit) = 0.99.
inline const double kOpaqueLogit = logit(0.99);

// Centres of all sets, concatenated in order.
std::vector<Vec3> union_centers(std::span<const GaussianSet> sets);

}  // namespace compc
