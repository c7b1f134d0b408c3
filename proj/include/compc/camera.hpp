#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "compc/point_cloud.hpp"

namespace compc {

struct CameraIntrinsics {
  int width = 256;
  int height = 256;
  double fov_y_deg = 49.1;
  double near = 0.01;
  double far = 100.0;

  double focal_px() const;  // vertical focal length in pixels
  void validate() const;
};

// Orthonormal look-at frame. Image x follows `right`, image y follows -`up`,
// depth is measured along `forward`.
struct CameraFrame {
  Vec3 position;
  Vec3 right, up, forward;

  // (x, y, depth) in camera coordinates.
  Vec3 to_camera(const Vec3& p) const {
    const Vec3 d = p - position;
    return {d.dot(right), d.dot(up), d.dot(forward)};
  }
  // Rows (right, up, -forward): world-to-camera rotation with det +1.
  Eigen::Matrix3d rotation() const;
};

struct CameraPose {
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
  double radius = 1.0;
  Vec3 target = Vec3::Zero();
  Vec3 up_hint = Vec3::UnitZ();

  // Unit vector from the target towards the camera; z is up, azimuth runs from +x towards +y.
  Vec3 direction() const;
  Vec3 position() const { return target + radius * direction(); }
  CameraFrame frame() const;
  // Pose shifted by the given elevation/azimuth/radius offsets about the same target.
  CameraPose offset(double d_elevation_deg, double d_azimuth_deg, double d_radius) const;
};

struct Projection {
  Vec2 pixel = Vec2::Zero();  // continuous pixel coords; pixel (i, j) spans [j, j+1) x [i, i+1)
  double depth = 0.0;
  bool in_frustum = false;
};

Projection project(const Vec3& p, const CameraFrame& frame, const CameraIntrinsics& intr);
std::vector<Projection> project_points(std::span<const Vec3> points, const CameraPose& pose,
                                       const CameraIntrinsics& intr);

// Mean view-axis depth of the points.
double mean_depth(std::span<const Vec3> points, const CameraPose& pose);

// n poses on the golden-angle spiral around `target`.
std::vector<CameraPose> fibonacci_sphere_poses(std::size_t n, double radius, const Vec3& target = Vec3::Zero());

// Orbit that keeps a cloud in frame: target = bounding-box centre, radius = 2x
// the radius of the sphere circumscribing the cube around the bounding box.
struct Orbit {
  Vec3 target;
  double radius;
};
Orbit default_orbit(std::span<const Vec3> points);

// CSV rows "elevation,azimuth,radius" with a header line.
void write_pose_csv(const std::filesystem::path& path, std::span<const CameraPose> poses);
std::vector<CameraPose> read_pose_csv(const std::filesystem::path& path, const Vec3& target = Vec3::Zero());

}  // namespace compc
