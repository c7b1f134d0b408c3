#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "compc/camera.hpp"
#include "compc/point_cloud.hpp"

namespace compc {

// Per-pixel depth test over projected centres. Each point occupies its centre
// pixel plus every pixel whose centre lies within its projected footprint
// (footprint_radius * focal / depth pixels); the nearest point wins a pixel
// (ties: lower index). Returns the sorted, unique indices owning at least one
// pixel. A zero footprint reduces to a pure point z-buffer.
std::vector<std::size_t> frontmost_filter(std::span<const Vec3> centers, std::span<const double> footprint_radius,
                                          const CameraPose& pose, const CameraIntrinsics& intr);
std::vector<std::size_t> frontmost_filter(std::span<const Vec3> centers, double footprint_radius,
                                          const CameraPose& pose, const CameraIntrinsics& intr);

// Intrinsics used for visibility queries: 256x256 z-buffer, 49.1 degree fov.
CameraIntrinsics visibility_intrinsics();

// Relative gap below which two candidate objectives are treated as equal.
inline constexpr double kObjectiveTieTolerance = 1e-12;

struct ViewpointEstimate {
  std::size_t index = 0;
  CameraPose pose;
  std::vector<double> objective;  // per candidate; +inf when nothing is visible
};

// Objective of one candidate: chamfer_l1(P[h(P, V)], P) + w0 * mean_depth(P, V).
double reference_objective(std::span<const Vec3> cloud, double footprint_radius, const CameraPose& pose,
                           const CameraIntrinsics& intr, double w0);

// Exhaustive argmin of reference_objective over the candidates (ties: lowest index).
// footprint_radius is in world units, see frontmost_filter.
ViewpointEstimate estimate_reference_viewpoint(std::span<const Vec3> cloud, std::span<const CameraPose> candidates,
                                               const CameraIntrinsics& intr, double w0 = 1e-3,
                                               double footprint_radius = 0.0);

}  // namespace compc
