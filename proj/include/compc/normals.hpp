#pragma once

#include <cstddef>
#include <vector>

#include "compc/point_cloud.hpp"

namespace compc {

struct NormalEstimate {
  PointCloud cloud;                   // input points with unit normals attached
  std::vector<std::size_t> degenerate;  // indices whose neighbourhood was rank deficient
};

// PCA normals from the k nearest neighbours (the point itself included).
// Orientation: away from the local neighbourhood centroid; when that cue is
// numerically flat, away from the global centroid.
// Requires cloud.size() >= k + 1.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k = 30);

}  // namespace compc
