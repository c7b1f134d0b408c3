#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <cmath>
#include <random>

#include "compc/error.hpp"
#include "compc/gaussians.hpp"
#include "compc/image_io.hpp"
#include "compc/metrics.hpp"
#include "compc/renderer.hpp"
#include "compc/sampling.hpp"
#include "compc/visibility.hpp"
#include "gradcheck.hpp"

using namespace compc;

namespace {

GaussianSet make_set(std::vector<Vec3> centers, double scale, double logit, const Vec3& color) {
  GaussianSet g;
  g.centers = std::move(centers);
  g.scale = scale;
  g.opacity_logits.assign(g.size(), logit);
  g.colors.assign(g.size(), color);
  return g;
}

}  // namespace

TEST(binarize_opacity, round_rule_and_straight_through) {
  EXPECT_EQ(binarize_opacity(logit(0.7)).value, 1.0);
  EXPECT_EQ(binarize_opacity(logit(0.3)).value, 0.01);
  EXPECT_EQ(binarize_opacity(0.0).value, 0.01);
  for (double l = -8.0; l <= 8.0; l += 0.37) {
    const auto b = binarize_opacity(l);
    EXPECT_TRUE(b.value == 1.0 || b.value == 0.01);
    const double s = sigmoid(l);
    EXPECT_EQ(b.d_logit, s * (1.0 - s));
  }
}

TEST(colorize_by_normals, range_map) {
  PointCloud c({Vec3::Zero(), Vec3::Zero()}, {Vec3(0, 0, 1), Vec3(-1, 0, 0)});
  const auto col = colorize_by_normals(c);
  EXPECT_EQ(col[0], Vec3(0.5, 0.5, 1.0));
  EXPECT_EQ(col[1], Vec3(0.0, 0.5, 0.5));
  const auto est = random_sphere_points(100, 1);
  PointCloud s(est, est);
  for (const auto& v : colorize_by_normals(s)) EXPECT_TRUE((v.array() >= 0).all() && (v.array() <= 1).all());
  EXPECT_THROW(colorize_by_normals(PointCloud({Vec3::Zero()})), PreconditionError);
}

TEST(render, single_splat_peaks_at_centre) {
  const CameraIntrinsics intr{65, 65, 49.1, 0.01, 100.0};
  const CameraPose pose{0, 0, 2};
  const auto img = render(make_set({Vec3::Zero()}, 0.1, 5.0, Vec3::Zero()), pose, intr);
  const auto alpha = [&](int x, int y) { return img.alpha[static_cast<std::size_t>(y) * 65 + x]; };
  double best = -1;
  int bx = -1, by = -1;
  for (int y = 0; y < 65; ++y)
    for (int x = 0; x < 65; ++x)
      if (alpha(x, y) > best) best = alpha(x, y), bx = x, by = y;
  EXPECT_EQ(bx, 32);
  EXPECT_EQ(by, 32);
  for (int r = 1; r < 20; ++r) {
    EXPECT_LE(alpha(32 + r, 32), alpha(32 + r - 1, 32));
    EXPECT_DOUBLE_EQ(alpha(32 + r, 32), alpha(32, 32 + r));
    EXPECT_DOUBLE_EQ(alpha(32 + r, 32), alpha(32 - r, 32));
  }
  EXPECT_EQ(img.pixel(0, 0), Vec3::Ones());
}

TEST(render, nearer_splat_occludes) {
  const CameraIntrinsics intr{33, 33, 49.1, 0.01, 100.0};
  const CameraPose pose{0, 0, 3};
  const Vec3 c1(1, 0, 0), c2(0, 1, 0);
  std::vector<GaussianSet> sets{make_set({Vec3(-0.5, 0, 0)}, 0.2, 5.0, c2), make_set({Vec3(0.5, 0, 0)}, 0.2, 5.0, c1)};
  const auto img = render(sets, pose, intr);
  EXPECT_LT((img.pixel(16, 16) - c1).cwiseAbs().maxCoeff(), 2e-3);
  std::swap(sets[0], sets[1]);
  EXPECT_LT((render(sets, pose, intr).pixel(16, 16) - c1).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(render, empty_set_is_background) {
  const auto img = render(std::span<const GaussianSet>{}, CameraPose{}, CameraIntrinsics{8, 8});
  for (double c : img.color) EXPECT_EQ(c, 1.0);
  for (double a : img.alpha) EXPECT_EQ(a, 0.0);
}

TEST(render, silhouette_matches_projection_oracle) {
  std::vector<Vec3> hemi;
  for (const auto& p : fibonacci_sphere(1000))
    if (p.z() >= 0) hemi.push_back(0.5 * p);
  const auto g = make_set(hemi, 0.02, 5.0, Vec3(0.2, 0.3, 0.4));
  const CameraIntrinsics intr{96, 96, 49.1, 0.01, 100.0};
  const CameraPose pose{90, 0, 2};
  const auto img = render(g, pose, intr);
  const auto proj = project_points(hemi, pose, intr);
  const double focal = intr.focal_px();
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) {
      bool covered = false;
      for (const auto& p : proj) {
        const double sigma = g.scale * focal / p.depth;
        const Vec2 d(x + 0.5 - p.pixel.x(), y + 0.5 - p.pixel.y());
        covered |= d.squaredNorm() <= 9.0 * sigma * sigma;
      }
      EXPECT_EQ(img.alpha[static_cast<std::size_t>(y) * 96 + x] > 0.0, covered) << x << "," << y;
    }
}

TEST(render, deterministic_and_bounded) {
  std::mt19937_64 rng(2);
  auto g = oracle::random_scene(rng, 32);
  const CameraIntrinsics intr{64, 64};
  const CameraPose pose{10, 20, 2};
  const auto a = render(g, pose, intr), b = render(g, pose, intr);
  EXPECT_EQ(a.color, b.color);
  EXPECT_EQ(a.depth, b.depth);
  for (std::size_t k = 0; k < a.pixel_count(); ++k) {
    EXPECT_GE(a.alpha[k], 0.0);
    EXPECT_LE(a.alpha[k], 1.0);
  }
  // All Gaussians switched off: alpha stays below delta times the fragment count.
  std::fill(g.opacity_logits.begin(), g.opacity_logits.end(), -4.0);
  const auto off = render(g, pose, intr);
  EXPECT_LE(*std::max_element(off.alpha.begin(), off.alpha.end()), 0.01 * g.size());
  EXPECT_LE(*std::max_element(off.alpha.begin(), off.alpha.end()), 0.99);
}

TEST(render_backward, colour_gradient_of_summed_image) {
  const CameraIntrinsics intr{32, 32};
  const CameraPose pose{0, 0, 2};
  const auto g = make_set({Vec3::Zero()}, 0.1, 5.0, Vec3(0.3, 0.3, 0.3));
  const std::vector<double> ones(3 * 32 * 32, 1.0);
  const auto grads = render_backward(std::span<const GaussianSet>(&g, 1), pose, intr, ones)[0];
  const auto img = render(g, pose, intr);
  double coverage = 0.0;
  for (double a : img.alpha) coverage += a;
  for (int c = 0; c < 3; ++c) {
    EXPECT_GT(grads.d_colors[0][c], 0.0);
    EXPECT_NEAR(grads.d_colors[0][c], coverage, 1e-9);
    auto gp = g, gm = g;
    gp.colors[0][c] += 1e-3;
    gm.colors[0][c] -= 1e-3;
    const double fd = (oracle::weighted_sum(render(gp, pose, intr), ones) -
                       oracle::weighted_sum(render(gm, pose, intr), ones)) / 2e-3;
    EXPECT_NEAR(grads.d_colors[0][c], fd, 1e-2 * std::abs(fd));
  }
}

TEST(render_backward, frozen_set_gets_zeros) {
  std::mt19937_64 rng(3);
  std::vector<GaussianSet> sets{oracle::random_scene(rng, 10), oracle::random_scene(rng, 10)};
  sets[0].frozen = true;
  std::vector<double> w(3 * 64 * 64, 1.0);
  const auto grads = render_backward(sets, CameraPose{0, 0, 2.5}, CameraIntrinsics{64, 64}, w);
  for (std::size_t i = 0; i < sets[0].size(); ++i) {
    EXPECT_EQ(grads[0].d_centers[i], Vec3::Zero());
    EXPECT_EQ(grads[0].d_colors[i], Vec3::Zero());
    EXPECT_EQ(grads[0].d_opacity_logits[i], 0.0);
  }
  EXPECT_EQ(grads[0].d_scale, 0.0);
  double mag = 0.0;
  for (const auto& c : grads[1].d_colors) mag += c.norm();
  EXPECT_GT(mag, 0.0);
}

TEST(render_backward, finite_difference_suite) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = oracle::renderer_gradient_check(5, 77);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GE(res.pass_rate(), 0.95) << res.passed << "/" << res.checked;
  EXPECT_LT(secs, 5.0);
}

TEST(render_backward, off_gaussian_passes_sigmoid_gradient) {
  // A single switched-off splat: d/dlogit must equal sigmoid'(logit) times d/dopacity,
  // and the latter is the derivative with respect to delta.
  const CameraIntrinsics intr{32, 32};
  const CameraPose pose{0, 0, 2};
  const auto g = make_set({Vec3(0.05, 0.02, -0.03)}, 0.1, -1.3, Vec3(0.1, 0.6, 0.2));
  std::vector<double> w(3 * 32 * 32);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& x : w) x = u(rng);
  const double d_logit = render_backward(std::span<const GaussianSet>(&g, 1), pose, intr, w)[0].d_opacity_logits[0];
  RenderOptions hi, lo;
  hi.delta = 0.01 + 1e-5;
  lo.delta = 0.01 - 1e-5;
  const double d_opacity =
      (oracle::weighted_sum(render(g, pose, intr, hi), w) - oracle::weighted_sum(render(g, pose, intr, lo), w)) / 2e-5;
  const double s = sigmoid(-1.3);
  EXPECT_NEAR(d_logit, s * (1 - s) * d_opacity, 1e-6 * std::abs(d_opacity) + 1e-12);
}

TEST(render, opaque_pixels_map_to_frontmost_set) {
  // Two centres can share a z-buffer pixel, so the check is statistical.
  const auto pts = random_sphere_points(4000, 9);
  const auto g = make_set(pts, mean_nearest_neighbor_distance(pts), 5.0, Vec3(0.5, 0.5, 0.5));
  const CameraIntrinsics intr{128, 128};
  const CameraPose pose{30, 60, 3};
  const Rasterizer r(std::span<const GaussianSet>(&g, 1), pose, intr);
  const auto visible = frontmost_filter(pts, g.scale, pose, intr);
  std::size_t opaque = 0, agree = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      if (r.image().alpha[static_cast<std::size_t>(y) * 128 + x] <= 0.5) continue;
      ++opaque;
      const long id = r.dominant_gaussian(x, y);
      ASSERT_GE(id, 0);
      agree += std::binary_search(visible.begin(), visible.end(), static_cast<std::size_t>(id));
    }
  EXPECT_GT(opaque, 1000u);
  EXPECT_GE(agree, 0.95 * opaque);
}

TEST(image_io, raw_round_trip) {
  std::mt19937_64 rng(2);
  const auto img = render(oracle::random_scene(rng, 8), CameraPose{0, 0, 2}, CameraIntrinsics{16, 12});
  const auto path = std::filesystem::temp_directory_path() / "compc_img.raw";
  io::write_raw_rgb(path, img.color);
  const auto back = io::read_raw_rgb(path);
  ASSERT_EQ(back.size(), img.color.size());
  for (std::size_t k = 0; k < back.size(); ++k) EXPECT_EQ(back[k], static_cast<double>(static_cast<float>(img.color[k])));
  io::write_png(std::filesystem::temp_directory_path() / "compc_img.png", img);
}
