#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "compc/camera.hpp"
#include "compc/sampling.hpp"
#include "compc/visibility.hpp"
#include "oracles.hpp"

using namespace compc;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Independent look-at construction (eye looks at target, z-up), returns (x, y, depth).
Vec3 lookat_camera_coords(const Vec3& eye, const Vec3& target, const Vec3& p) {
  const Vec3 back = (eye - target).normalized();
  const Vec3 side = Vec3::UnitZ().cross(back).normalized();
  const Vec3 up = back.cross(side);
  const Vec3 d = p - eye;
  return {d.dot(side), d.dot(up), -d.dot(back)};
}

std::vector<Vec3> hemisphere_points(std::size_t n) {
  std::vector<Vec3> out;
  for (const auto& p : fibonacci_sphere(2 * n))
    if (p.z() >= 0.0) out.push_back(p);
  return out;
}

}  // namespace

TEST(fibonacci_sphere_poses, single_pose_and_radii) {
  const auto one = fibonacci_sphere_poses(1, 2.5);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NEAR(one[0].position().norm(), 2.5, 1e-9);
  const Vec3 target(1, 2, 3);
  for (const auto& pose : fibonacci_sphere_poses(300, 1.7, target))
    EXPECT_NEAR((pose.position() - target).norm(), 1.7, 1e-9);
}

TEST(fibonacci_sphere_poses, uniform_spacing) {
  const std::size_t n = 5000;
  const auto poses = fibonacci_sphere_poses(n, 1.0);
  std::vector<Vec3> dirs;
  for (const auto& p : poses) dirs.push_back(p.direction());
  double min_angle = 1e9;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      min_angle = std::min(min_angle, std::acos(std::clamp(dirs[i].dot(dirs[j]), -1.0, 1.0)));
  // Spacing of n equal-area cells on the unit sphere.
  const double expected = std::sqrt(4.0 * std::numbers::pi / n);
  EXPECT_GE(min_angle, 0.6 * expected);
}

TEST(camera_pose, rotation_is_proper) {
  for (double el : {-89.0, -30.0, 0.0, 45.0, 90.0, -90.0})
    for (double az : {-140.0, 0.0, 33.0, 180.0}) {
      const Eigen::Matrix3d r = CameraPose{el, az, 2.0}.frame().rotation();
      EXPECT_NEAR(r.determinant(), 1.0, 1e-6);
      EXPECT_TRUE((r * r.transpose()).isIdentity(1e-9));
    }
}

TEST(project_points, target_maps_to_centre) {
  const CameraIntrinsics intr;
  const CameraPose pose{20.0, -140.0, 3.0, Vec3(0.1, 0.2, -0.3)};
  const auto pr = project_points(std::vector<Vec3>{pose.target}, pose, intr)[0];
  EXPECT_NEAR(pr.pixel.x(), 128.0, 1e-9);
  EXPECT_NEAR(pr.pixel.y(), 128.0, 1e-9);
  EXPECT_NEAR(pr.depth, 3.0, 1e-12);
  EXPECT_TRUE(pr.in_frustum);
}

TEST(project_points, behind_camera_not_in_frustum) {
  const CameraPose pose{0.0, 0.0, 2.0};
  const auto pr = project_points(std::vector<Vec3>{Vec3(5, 0, 0)}, pose, CameraIntrinsics{})[0];
  EXPECT_FALSE(pr.in_frustum);
  EXPECT_LT(pr.depth, 0.0);
}

TEST(project_points, closed_form_axis_camera) {
  // Camera at (2, 0, 0) looking down -x: image x = world y, image up = world z.
  const CameraIntrinsics intr{200, 100, 60.0, 0.01, 100.0};
  const double f = 50.0 / std::tan(30.0 * kDeg);
  const CameraPose pose{0.0, 0.0, 2.0};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const auto pr = project_points(pts, pose, intr);
  for (int i = 0; i < 10; ++i) {
    const double z = 2.0 - pts[i].x();
    EXPECT_NEAR(pr[i].pixel.x(), 100.0 + f * pts[i].y() / z, 1e-6);
    EXPECT_NEAR(pr[i].pixel.y(), 50.0 - f * pts[i].z() / z, 1e-6);
    EXPECT_NEAR(pr[i].depth, z, 1e-12);
  }
}

TEST(project_points, matches_lookat_oracle) {
  const CameraIntrinsics intr;
  const double f = intr.focal_px();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(-80, 80), az(-180, 180), u(-0.4, 0.4);
  for (int trial = 0; trial < 20; ++trial) {
    const CameraPose pose{ang(rng), az(rng), 2.0 + trial * 0.1, Vec3(u(rng), u(rng), u(rng))};
    const Vec3 p(u(rng), u(rng), u(rng));
    const Vec3 c = lookat_camera_coords(pose.position(), pose.target, p);
    const auto pr = project_points(std::vector<Vec3>{p}, pose, intr)[0];
    EXPECT_NEAR(pr.depth, c.z(), 1e-9);
    EXPECT_NEAR(pr.pixel.x(), 128.0 + f * c.x() / c.z(), 1e-6);
    EXPECT_NEAR(pr.pixel.y(), 128.0 - f * c.y() / c.z(), 1e-6);
  }
}

TEST(mean_depth, tangent_plane_and_pullback) {
  const CameraPose pose{30.0, 75.0, 2.0};
  const CameraFrame fr = pose.frame();
  std::vector<Vec3> plane;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) plane.push_back(0.1 * i * fr.right + 0.1 * j * fr.up);
  EXPECT_NEAR(mean_depth(plane, pose), 2.0, 1e-12);
  EXPECT_NEAR(mean_depth(plane, pose.offset(0, 0, 0.75)), 2.75, 1e-12);
  const auto cloud = oracle::uniform_cube(200, 8);
  double brute = 0.0;
  for (const auto& p : cloud) brute += (p - fr.position).dot(fr.forward);
  EXPECT_NEAR(mean_depth(cloud, pose), brute / cloud.size(), 1e-12);
}

TEST(pose_csv, round_trip) {
  const auto poses = fibonacci_sphere_poses(17, 1.3);
  const auto path = std::filesystem::temp_directory_path() / "compc_poses.csv";
  write_pose_csv(path, poses);
  const auto back = read_pose_csv(path);
  ASSERT_EQ(back.size(), poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i)
    EXPECT_LT((back[i].position() - poses[i].position()).norm(), 1e-9);
}

TEST(frontmost_filter, occlusion_on_axis) {
  const CameraPose pose{0.0, 0.0, 3.0};
  const std::vector<Vec3> pts{Vec3(1, 0, 0), Vec3(2, 0, 0)};  // depths 2 and 1
  EXPECT_EQ(frontmost_filter(pts, 0.0, pose, visibility_intrinsics()), (std::vector<std::size_t>{1}));
  EXPECT_EQ(frontmost_filter(std::vector<Vec3>{Vec3(0.1, 0.2, 0)}, 0.0, pose, visibility_intrinsics()),
            (std::vector<std::size_t>{0}));
  EXPECT_TRUE(frontmost_filter(std::vector<Vec3>{Vec3(9, 0, 0)}, 0.0, pose, visibility_intrinsics()).empty());
}

TEST(frontmost_filter, solid_sphere_keeps_only_front_surface) {
  auto surface = fibonacci_sphere(20000);
  const std::size_t n_surface = surface.size();
  auto interior = random_ball_points(5000, 5);
  std::vector<Vec3> pts = surface;
  for (const auto& p : interior) pts.push_back(0.95 * p);
  const double spacing = std::sqrt(4.0 * std::numbers::pi / n_surface);
  for (const CameraPose pose : {CameraPose{0, 0, 3}, CameraPose{40, 120, 3}, CameraPose{-70, -30, 4}}) {
    const auto kept = frontmost_filter(pts, spacing, pose, visibility_intrinsics());
    ASSERT_FALSE(kept.empty());
    const Vec3 eye = pose.position();
    for (auto i : kept) {
      EXPECT_LT(i, n_surface);
      EXPECT_NEAR(pts[i].norm(), 1.0, 0.02);
      // Ray-cast oracle: the segment from the eye to a visible point leaves the
      // sphere no earlier than the point itself, i.e. the point faces the eye.
      EXPECT_GT(pts[i].dot(eye - pts[i]), -0.05 * (eye - pts[i]).norm());
    }
  }
}

TEST(frontmost_filter, higher_resolution_keeps_visible_points) {
  const auto pts = random_sphere_points(3000, 6);
  const CameraPose pose{25, 10, 3};
  const Vec3 eye = pose.position();
  CameraIntrinsics lo = visibility_intrinsics();
  lo.width = lo.height = 64;
  const auto coarse = frontmost_filter(pts, 0.0, pose, lo);
  const auto fine = frontmost_filter(pts, 0.0, pose, visibility_intrinsics());
  EXPECT_TRUE(std::is_sorted(fine.begin(), fine.end()));
  EXPECT_EQ(std::adjacent_find(fine.begin(), fine.end()), fine.end());
  for (auto i : coarse) {
    if (pts[i].dot(eye - pts[i]) <= 0.0) continue;
    EXPECT_TRUE(std::binary_search(fine.begin(), fine.end(), i)) << i;
  }
}

TEST(estimate_reference_viewpoint, argmin_is_exhaustive_minimum) {
  const auto cloud = hemisphere_points(1000);
  const auto candidates = fibonacci_sphere_poses(40, 3.0, Vec3(0, 0, 0.5));
  const auto est = estimate_reference_viewpoint(cloud, candidates, visibility_intrinsics());
  ASSERT_LT(est.index, candidates.size());
  EXPECT_EQ(est.pose.position(), candidates[est.index].position());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    EXPECT_LE(est.objective[est.index], est.objective[i]);
    EXPECT_NEAR(est.objective[i], reference_objective(cloud, 0.0, candidates[i], visibility_intrinsics(), 1e-3),
                1e-12);
  }
}

TEST(estimate_reference_viewpoint, empty_view_scores_infinity) {
  const std::vector<Vec3> cloud{Vec3(0, 0, 0), Vec3(0.1, 0, 0)};
  std::vector<CameraPose> candidates{CameraPose{0, 0, 3, Vec3(0, 50, 0)}, CameraPose{0, 0, 3}};
  const auto est = estimate_reference_viewpoint(cloud, candidates, visibility_intrinsics());
  EXPECT_TRUE(std::isinf(est.objective[0]));
  EXPECT_EQ(est.index, 1u);
}

TEST(estimate_reference_viewpoint, symmetric_cloud_picks_first_candidate) {
  // Cloud closed under exact 90 degree turns about z, candidates related by the same turns.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 300; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    cloud.push_back(p);
    cloud.emplace_back(-p.y(), p.x(), p.z());
    cloud.emplace_back(-p.x(), -p.y(), p.z());
    cloud.emplace_back(p.y(), -p.x(), p.z());
  }
  std::vector<CameraPose> candidates;
  for (double az : {0.0, 90.0, 180.0, 270.0}) candidates.push_back(CameraPose{20.0, az, 3.0});
  const auto est = estimate_reference_viewpoint(cloud, candidates, visibility_intrinsics());
  for (double v : est.objective) EXPECT_NEAR(v, est.objective[0], 1e-6);
  EXPECT_EQ(est.index, 0u);
}

TEST(estimate_reference_viewpoint, rigid_invariance) {
  const auto cloud = hemisphere_points(800);
  const auto candidates = fibonacci_sphere_poses(30, 3.0, Vec3(0, 0, 0.5));
  const double turn = 37.0;
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(turn * kDeg, Vec3::UnitZ()).toRotationMatrix();
  const Vec3 t(0.4, -0.2, 1.5);
  std::vector<Vec3> moved;
  for (const auto& p : cloud) moved.push_back(rz * p + t);
  for (const auto& c : candidates) {
    CameraPose m = c;
    m.azimuth_deg += turn;
    m.target = rz * c.target + t;
    // The same rigid motion of cloud and camera leaves the visibility test unchanged
    // up to the camera's roll, which a z-turn does not alter.
    EXPECT_NEAR(reference_objective(cloud, 0.02, c, visibility_intrinsics(), 1e-3),
                reference_objective(moved, 0.02, m, visibility_intrinsics(), 1e-3), 1e-6);
  }
}
