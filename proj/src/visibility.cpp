#include "compc/visibility.hpp"

#include <algorithm>
#include <cmath>

#include "compc/error.hpp"
#include "compc/kdtree.hpp"
#include "compc/metrics.hpp"
#include "compc/parallel.hpp"

namespace compc {

std::vector<std::size_t> frontmost_filter(std::span<const Vec3> centers, std::span<const double> footprint_radius,
                                          const CameraPose& pose, const CameraIntrinsics& intr) {
  require(footprint_radius.size() == centers.size(), "frontmost_filter: radius/center length mismatch");
  intr.validate();
  const CameraFrame frame = pose.frame();
  const double focal = intr.focal_px();
  const std::size_t w = static_cast<std::size_t>(intr.width), h = static_cast<std::size_t>(intr.height);
  constexpr std::size_t kEmpty = std::numeric_limits<std::size_t>::max();
  std::vector<double> zbuf(w * h, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> owner(w * h, kEmpty);

  auto offer = [&](std::size_t px, std::size_t py, double depth, std::size_t i) {
    const std::size_t k = py * w + px;
    if (depth < zbuf[k] || (depth == zbuf[k] && i < owner[k])) {
      zbuf[k] = depth;
      owner[k] = i;
    }
  };

  for (std::size_t i = 0; i < centers.size(); ++i) {
    const Projection pr = project(centers[i], frame, intr);
    if (!pr.in_frustum) continue;
    const auto cx = static_cast<std::size_t>(pr.pixel.x()), cy = static_cast<std::size_t>(pr.pixel.y());
    offer(cx, cy, pr.depth, i);
    const double rho = footprint_radius[i] * focal / pr.depth;
    if (rho < 0.5) continue;
    const long x0 = std::max(0L, static_cast<long>(std::floor(pr.pixel.x() - rho)));
    const long x1 = std::min(static_cast<long>(w) - 1, static_cast<long>(std::floor(pr.pixel.x() + rho)));
    const long y0 = std::max(0L, static_cast<long>(std::floor(pr.pixel.y() - rho)));
    const long y1 = std::min(static_cast<long>(h) - 1, static_cast<long>(std::floor(pr.pixel.y() + rho)));
    const double rho2 = rho * rho;
    for (long y = y0; y <= y1; ++y) {
      const double dy = y + 0.5 - pr.pixel.y();
      for (long x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - pr.pixel.x();
        if (dx * dx + dy * dy <= rho2) offer(static_cast<std::size_t>(x), static_cast<std::size_t>(y), pr.depth, i);
      }
    }
  }

  std::vector<std::size_t> out;
  for (auto o : owner)
    if (o != kEmpty) out.push_back(o);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> frontmost_filter(std::span<const Vec3> centers, double footprint_radius,
                                          const CameraPose& pose, const CameraIntrinsics& intr) {
  const std::vector<double> radii(centers.size(), footprint_radius);
  return frontmost_filter(centers, radii, pose, intr);
}

CameraIntrinsics visibility_intrinsics() { return CameraIntrinsics{256, 256, 49.1, 0.01, 100.0}; }

namespace {

double objective_with_tree(std::span<const Vec3> cloud, const KdTree& cloud_tree, double footprint_radius,
                           const CameraPose& pose, const CameraIntrinsics& intr, double w0) {
  const auto visible = frontmost_filter(cloud, footprint_radius, pose, intr);
  if (visible.empty()) return std::numeric_limits<double>::infinity();
  std::vector<Vec3> subset;
  subset.reserve(visible.size());
  for (auto i : visible) subset.push_back(cloud[i]);
  return chamfer_l1(KdTree(subset), cloud_tree) + w0 * mean_depth(cloud, pose);
}

}  // namespace

double reference_objective(std::span<const Vec3> cloud, double footprint_radius, const CameraPose& pose,
                           const CameraIntrinsics& intr, double w0) {
  require(!cloud.empty(), "reference_objective: empty cloud");
  return objective_with_tree(cloud, KdTree(cloud), footprint_radius, pose, intr, w0);
}

ViewpointEstimate estimate_reference_viewpoint(std::span<const Vec3> cloud, std::span<const CameraPose> candidates,
                                               const CameraIntrinsics& intr, double w0, double footprint_radius) {
  require(!candidates.empty(), "estimate_reference_viewpoint: no candidates");
  require(!cloud.empty(), "estimate_reference_viewpoint: empty cloud");
  const KdTree tree(cloud);
  ViewpointEstimate est;
  est.objective.resize(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    est.objective[i] = objective_with_tree(cloud, tree, footprint_radius, candidates[i], intr, w0);
  });
  // Objectives equal up to rounding count as ties so symmetric inputs resolve to the lowest index.
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double best = est.objective[est.index];
    const double margin = std::isfinite(best) ? kObjectiveTieTolerance * std::abs(best) : 0.0;
    if (est.objective[i] < best - margin) est.index = i;
  }
  est.pose = candidates[est.index];
  return est;
}

}  // namespace compc
