#include "compc/camera.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "compc/error.hpp"
#include "compc/sampling.hpp"

namespace compc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

double CameraIntrinsics::focal_px() const { return 0.5 * height / std::tan(0.5 * fov_y_deg * kDeg); }

void CameraIntrinsics::validate() const {
  require(width > 0 && height > 0, "intrinsics: image size must be positive");
  require(near > 0.0 && near < far, "intrinsics: need 0 < near < far");
  require(fov_y_deg > 1.0 && fov_y_deg < 179.0, "intrinsics: fov must lie in (1, 179) degrees");
}

Eigen::Matrix3d CameraFrame::rotation() const {
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = up.transpose();
  r.row(2) = -forward.transpose();
  return r;
}

Vec3 CameraPose::direction() const {
  const double el = elevation_deg * kDeg, az = azimuth_deg * kDeg;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

CameraFrame CameraPose::frame() const {
  require(radius > 0.0, "camera pose: radius must be positive");
  CameraFrame f;
  f.position = position();
  f.forward = -direction();
  Vec3 right = f.forward.cross(up_hint);
  if (right.norm() < 1e-9) {
    // Looking along the up hint: use the elevation tangent as image up.
    const double el = elevation_deg * kDeg, az = azimuth_deg * kDeg;
    const Vec3 tangent(-std::sin(el) * std::cos(az), -std::sin(el) * std::sin(az), std::cos(el));
    right = f.forward.cross(tangent);
  }
  f.right = right.normalized();
  f.up = f.right.cross(f.forward).normalized();
  return f;
}

CameraPose CameraPose::offset(double d_elevation_deg, double d_azimuth_deg, double d_radius) const {
  CameraPose p = *this;
  p.elevation_deg += d_elevation_deg;
  p.azimuth_deg += d_azimuth_deg;
  p.radius += d_radius;
  return p;
}

Projection project(const Vec3& p, const CameraFrame& frame, const CameraIntrinsics& intr) {
  const Vec3 c = frame.to_camera(p);
  Projection out;
  out.depth = c.z();
  if (c.z() <= intr.near) return out;
  const double f = intr.focal_px();
  out.pixel = {0.5 * intr.width + f * c.x() / c.z(), 0.5 * intr.height - f * c.y() / c.z()};
  out.in_frustum = c.z() < intr.far && out.pixel.x() >= 0.0 && out.pixel.x() < intr.width && out.pixel.y() >= 0.0 &&
                   out.pixel.y() < intr.height;
  return out;
}

std::vector<Projection> project_points(std::span<const Vec3> points, const CameraPose& pose,
                                       const CameraIntrinsics& intr) {
  const CameraFrame frame = pose.frame();
  std::vector<Projection> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(project(p, frame, intr));
  return out;
}

double mean_depth(std::span<const Vec3> points, const CameraPose& pose) {
  require(!points.empty(), "mean_depth: empty cloud");
  const CameraFrame frame = pose.frame();
  double sum = 0.0;
  for (const auto& p : points) sum += (p - frame.position).dot(frame.forward);
  return sum / static_cast<double>(points.size());
}

std::vector<CameraPose> fibonacci_sphere_poses(std::size_t n, double radius, const Vec3& target) {
  require(n >= 1, "fibonacci_sphere_poses: n must be >= 1");
  std::vector<CameraPose> poses;
  poses.reserve(n);
  for (const auto& d : fibonacci_sphere(n)) {
    CameraPose pose;
    pose.elevation_deg = std::asin(std::clamp(d.z(), -1.0, 1.0)) / kDeg;
    pose.azimuth_deg = std::atan2(d.y(), d.x()) / kDeg;
    pose.radius = radius;
    pose.target = target;
    poses.push_back(pose);
  }
  return poses;
}

Orbit default_orbit(std::span<const Vec3> points) {
  const Aabb box = Aabb::of(points);
  const double longest = box.extent().maxCoeff();
  const double radius = 2.0 * 0.5 * std::sqrt(3.0) * (longest > 0.0 ? longest : 1.0);
  return {box.center(), radius};
}

void write_pose_csv(const std::filesystem::path& path, std::span<const CameraPose> poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "elevation,azimuth,radius\n" << std::setprecision(17);
  for (const auto& p : poses) out << p.elevation_deg << ',' << p.azimuth_deg << ',' << p.radius << '\n';
}

std::vector<CameraPose> read_pose_csv(const std::filesystem::path& path, const Vec3& target) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<CameraPose> poses;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CameraPose p;
    char c1 = 0, c2 = 0;
    if (!(ls >> p.elevation_deg >> c1 >> p.azimuth_deg >> c2 >> p.radius) || c1 != ',' || c2 != ',')
      throw IoError(path.string() + ": malformed pose row '" + line + "'");
    p.target = target;
    poses.push_back(p);
  }
  return poses;
}

}  // namespace compc
