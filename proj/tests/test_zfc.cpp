#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "compc/adam.hpp"
#include "compc/bridge.hpp"
#include "compc/error.hpp"
#include "compc/metrics.hpp"
#include "compc/sampling.hpp"
#include "compc/visibility.hpp"
#include "compc/zfc.hpp"
#include "echo_server.hpp"
#include "oracles.hpp"

using namespace compc;
using namespace compc::zfc;

namespace {

PointCloud hemisphere(std::size_t n, std::uint64_t seed) {
  PointCloud c;
  for (const auto& p : random_sphere_points(4 * n, seed, 0.5))
    if (p.z() >= 0.0 && c.size() < n) {
      c.points.push_back(p);
      c.normals.push_back(p.normalized());
    }
  return c;
}

PointCloud lattice(int n, double spacing) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.points.emplace_back((i - 0.5 * (n - 1)) * spacing, (j - 0.5 * (n - 1)) * spacing, 0.0);
  return c;
}

ZfcConfig small_config() {
  ZfcConfig cfg;
  cfg.iterations = 12;
  cfg.candidate_views = 40;
  cfg.render_size = 32;
  cfg.seed = 5;
  cfg.checkpoint_dir = std::filesystem::temp_directory_path() / "compc_test_zfc";
  return cfg;
}

bool same_bytes(const GaussianSet& a, const GaussianSet& b) {
  if (a.size() != b.size() || a.frozen != b.frozen) return false;
  if (std::memcmp(&a.scale, &b.scale, sizeof(double)) != 0) return false;
  return std::memcmp(a.centers.data(), b.centers.data(), a.size() * sizeof(Vec3)) == 0 &&
         std::memcmp(a.colors.data(), b.colors.data(), a.size() * sizeof(Vec3)) == 0 &&
         std::memcmp(a.opacity_logits.data(), b.opacity_logits.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam adam(3, {0.1, 0.9, 0.999, 1e-8});
  std::vector<double> x{1.0, -2.0, 0.0}, g{5.0, -0.01, 0.0};
  adam.step(x, g);
  EXPECT_NEAR(x[0], 0.9, 1e-6);
  EXPECT_NEAR(x[1], -1.9, 1e-5);
  EXPECT_EQ(x[2], 0.0);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, MinimizesQuadratic) {
  Adam adam(2, {0.05, 0.9, 0.999, 1e-8});
  std::vector<double> x{3.0, -4.0}, g(2);
  for (int i = 0; i < 2000; ++i) {
    g[0] = 2.0 * (x[0] - 1.0);
    g[1] = 2.0 * (x[1] + 0.5);
    adam.step(x, g);
  }
  EXPECT_NEAR(x[0], 1.0, 1e-3);
  EXPECT_NEAR(x[1], -0.5, 1e-3);
}

TEST(ZfcInit, PartialGaussiansAreFrozenOpaque) {
  const auto grid = lattice(10, 0.1);
  const auto g = init_partial_gaussians(grid);
  EXPECT_TRUE(g.frozen);
  EXPECT_NEAR(g.scale, 0.1, 1e-12);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g.opacity(i), 1.0);
    EXPECT_EQ(g.centers[i], grid.points[i]);
  }
}

TEST(ZfcInit, ZeroNoiseReproducesInput) {
  const auto hemi = hemisphere(300, 1);
  ZfcConfig cfg;
  cfg.sigma_n = 0.0;
  const auto g = init_completion_gaussians(hemi, cfg);
  ASSERT_EQ(g.size(), hemi.size());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.centers[i], hemi.points[i]);
  EXPECT_FALSE(g.frozen);
  EXPECT_NEAR(g.scale, oracle::brute_mean_nn(hemi.points), 1e-12);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(sigmoid(g.opacity_logits[i]), 0.9, 1e-12);
    EXPECT_EQ(g.colors[i], Vec3::Constant(0.5));
  }
}

TEST(ZfcInit, ResampledCentresComeFromInput) {
  const auto hemi = hemisphere(200, 2);
  ZfcConfig cfg;
  cfg.sigma_n = 0.0;
  for (std::size_t m : {50u, 500u}) {
    cfg.completion_count = m;
    const auto g = init_completion_gaussians(hemi, cfg);
    ASSERT_EQ(g.size(), m);
    for (const auto& c : g.centers) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : hemi.points) best = std::min(best, (c - p).norm());
      EXPECT_EQ(best, 0.0);
    }
  }
}

TEST(ZfcInit, NoiseStandardDeviation) {
  const auto hemi = hemisphere(4096, 3);
  ASSERT_EQ(hemi.size(), 4096u);
  ZfcConfig cfg;
  const auto g = init_completion_gaussians(hemi, cfg);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      const double d = g.centers[i][k] - hemi.points[i][k];
      sum += d;
      sum2 += d * d;
    }
  const double n = 3.0 * g.size();
  const double sd = std::sqrt(sum2 / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd, 0.05, 0.005);
  EXPECT_NEAR(g.scale, oracle::brute_mean_nn(g.centers), 1e-12);
}

TEST(ZfcInit, Deterministic) {
  const auto hemi = hemisphere(300, 4);
  ZfcConfig cfg;
  cfg.seed = 9;
  EXPECT_TRUE(same_bytes(init_completion_gaussians(hemi, cfg), init_completion_gaussians(hemi, cfg)));
  cfg.seed = 10;
  const auto other = init_completion_gaussians(hemi, cfg);
  cfg.seed = 9;
  EXPECT_FALSE(same_bytes(init_completion_gaussians(hemi, cfg), other));
}

namespace {

// 8x8 lattice facing the camera with points ~9 px apart and tiny footprints,
// so every point is frontmost.
struct PlaneScene {
  PointCloud grid = lattice(8, 0.1);
  CameraPose pose{90.0, 0.0, 3.0};
  CameraIntrinsics intr = visibility_intrinsics();
  GaussianSet g_in, g_m;
  PlaneScene() {
    g_in = init_partial_gaussians(grid);
    g_in.scale = 1e-3;
    g_m = g_in;
    g_m.frozen = false;
  }
};

}  // namespace

TEST(Preservation, ZeroWhenCompletionMatchesInput) {
  PlaneScene s;
  const GaussianSet sets[2] = {s.g_in, s.g_m};
  const auto r = preservation_loss(sets, s.grid.points, s.pose, s.intr, 1e2);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.selected, s.grid.size());
}

TEST(Preservation, StrayPointByHand) {
  PlaneScene s;
  s.g_m.centers = {Vec3(1.0, 0.0, 0.0)};
  s.g_m.opacity_logits = {0.0};
  s.g_m.colors = {Vec3::Zero()};
  const GaussianSet sets[2] = {s.g_in, s.g_m};
  const auto r = preservation_loss(sets, s.grid.points, s.pose, s.intr, 1e2);
  ASSERT_EQ(r.selected, 65u);
  // Nearest lattice point is (0.35, +-0.05, 0).
  const double d = std::hypot(0.65, 0.05);
  EXPECT_NEAR(r.value, 1e2 * 0.5 * d / 65.0, 1e-12);
  const Vec3 expect = 1e2 * 0.5 / 65.0 * Vec3(0.65, 0.05, 0.0).normalized();
  EXPECT_NEAR(r.d_centers[1][0].x(), expect.x(), 1e-12);
  EXPECT_NEAR(std::abs(r.d_centers[1][0].y()), expect.y(), 1e-12);
  for (const auto& g : r.d_centers[0]) EXPECT_EQ(g, Vec3::Zero());
}

TEST(Preservation, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  PlaneScene s;
  s.g_m.centers.clear();
  for (int i = 0; i < 16; ++i) s.g_m.centers.emplace_back(u(rng), u(rng), 0.2 + 0.5 * u(rng));
  s.g_m.opacity_logits.assign(16, 0.0);
  s.g_m.colors.assign(16, Vec3::Zero());
  auto loss = [&](const GaussianSet& gm) {
    const GaussianSet sets[2] = {s.g_in, gm};
    return preservation_loss(sets, s.grid.points, s.pose, s.intr, 1e2);
  };
  const auto base = loss(s.g_m);
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t i = 0; i < 16; ++i)
    for (int k = 0; k < 3; ++k) {
      GaussianSet p = s.g_m, m = s.g_m;
      p.centers[i][k] += h;
      m.centers[i][k] -= h;
      const auto lp = loss(p), lm = loss(m);
      if (lp.selected != base.selected || lm.selected != base.selected) continue;
      EXPECT_NEAR((lp.value - lm.value) / (2 * h), base.d_centers[1][i][k], 1e-5);
      ++checked;
    }
  EXPECT_GT(checked, 24);
}

TEST(Regularizer, AbsoluteScale) {
  const auto r = scaling_regularizer(0.02, 1e3);
  EXPECT_DOUBLE_EQ(r.value, 20.0);
  EXPECT_DOUBLE_EQ(r.d_scale, 1e3);
}

TEST(TrainingPose, DeterministicAndUniform) {
  ZfcConfig cfg;
  const CameraPose ref{-30.0, 70.0, 2.2, Vec3(0.1, 0.0, 0.0)};
  const auto a = sample_training_pose(ref, cfg, 4, 0), b = sample_training_pose(ref, cfg, 4, 0);
  EXPECT_EQ(a.elevation_deg, b.elevation_deg);
  EXPECT_EQ(a.azimuth_deg, b.azimuth_deg);
  EXPECT_NE(sample_training_pose(ref, cfg, 4, 1).azimuth_deg, a.azimuth_deg);

  constexpr int kBins = 36, kSamples = 10000;
  std::vector<int> hist(kBins, 0);
  for (int i = 0; i < kSamples; ++i) {
    const auto p = sample_training_pose(ref, cfg, 4, static_cast<std::uint64_t>(i));
    EXPECT_EQ(p.radius, ref.radius);
    EXPECT_EQ(p.target, ref.target);
    const double d_el = p.elevation_deg - ref.elevation_deg, d_az = p.azimuth_deg - ref.azimuth_deg;
    EXPECT_GE(d_el, -45.0);
    EXPECT_LE(d_el, 45.0);
    ASSERT_GE(d_az, -180.0);
    ASSERT_LT(d_az, 180.0);
    ++hist[static_cast<int>((d_az + 180.0) / 10.0)];
  }
  const double p = 1.0 / kBins, mean = kSamples * p, sd = std::sqrt(kSamples * p * (1 - p));
  for (int h : hist) EXPECT_LT(std::abs(h - mean), 3.0 * sd + 1.0);
}

TEST(Config, Validation) {
  ZfcConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg = {};
  cfg.delta = 0.7;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg = {};
  cfg.lr_centers = -1;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(Checkpoint, RoundTrip) {
  const auto hemi = hemisphere(100, 6);
  ZfcConfig cfg;
  GaussianSet sets[2] = {init_partial_gaussians(hemi), init_completion_gaussians(hemi, cfg)};
  sets[1].opacity_logits[3] = -2.0;
  const auto path = std::filesystem::temp_directory_path() / "compc_ckpt.ply";
  write_checkpoint(path, sets);
  const auto back = read_checkpoint(path);
  ASSERT_EQ(back.size(), 2u);
  for (int s = 0; s < 2; ++s) {
    ASSERT_EQ(back[s].size(), sets[s].size());
    EXPECT_EQ(back[s].scale, sets[s].scale);
    EXPECT_EQ(back[s].frozen, sets[s].frozen);
    for (std::size_t i = 0; i < back[s].size(); ++i) {
      EXPECT_NEAR((back[s].centers[i] - sets[s].centers[i]).norm(), 0.0, 1e-6);
      EXPECT_NEAR((back[s].colors[i] - sets[s].colors[i]).norm(), 0.0, 1e-6);
      EXPECT_EQ(back[s].opacity(i), sets[s].opacity(i));
    }
  }
  std::filesystem::remove(path);
}

TEST(RunZfc, PartialBlockUnchangedAndOpacitiesBinary) {
  const auto hemi = hemisphere(200, 7);
  PointCloud sphere;
  for (const auto& p : random_sphere_points(400, 8, 0.5)) {
    sphere.points.push_back(p);
    sphere.normals.push_back(p.normalized());
  }
  auto oracle = make_oracle(sphere);
  const auto cfg = small_config();
  const GaussianSet before = init_partial_gaussians(hemi);
  int calls = 0;
  const auto res = run_zfc(hemi, *oracle, cfg, [&](const ZfcStep& step, const GaussianSet& g_in, const GaussianSet& g_m) {
    EXPECT_EQ(step.iteration, calls++);
    EXPECT_TRUE(same_bytes(g_in, before));
    for (std::size_t i = 0; i < g_m.size(); ++i) {
      const double o = g_m.opacity(i, cfg.delta);
      EXPECT_TRUE(o == 1.0 || o == cfg.delta);
    }
  });
  EXPECT_EQ(calls, cfg.iterations);
  EXPECT_EQ(res.history.size(), static_cast<std::size_t>(cfg.iterations));
  EXPECT_TRUE(same_bytes(res.g_in, before));
  EXPECT_FALSE(same_bytes(res.g_m, init_completion_gaussians(hemi, cfg)));
  EXPECT_EQ(res.reference_image.width, 32);
}

TEST(RunZfc, Deterministic) {
  const auto hemi = hemisphere(150, 9);
  auto oracle = make_oracle(hemi);
  const auto cfg = small_config();
  const auto a = run_zfc(hemi, *oracle, cfg), b = run_zfc(hemi, *oracle, cfg);
  EXPECT_TRUE(same_bytes(a.g_m, b.g_m));
}

TEST(RunZfc, ZeroGuidanceDescendsPreservation) {
  const auto hemi = hemisphere(200, 10);
  ZeroProvider zero;
  auto cfg = small_config();
  cfg.iterations = 150;
  const auto res = run_zfc(hemi, zero, cfg);
  const auto& h = res.history;
  for (std::size_t i = 0; i + 50 < h.size(); ++i) EXPECT_LE(h[i + 50].preservation, h[i].preservation) << i;
  EXPECT_LT(h.back().preservation, h.front().preservation);
  EXPECT_LT(h.back().scale, h.front().scale);
}

TEST(RunZfc, CompleteInputDoesNotDegrade) {
  PointCloud sphere;
  for (const auto& p : random_sphere_points(400, 11, 0.5)) {
    sphere.points.push_back(p);
    sphere.normals.push_back(p.normalized());
  }
  auto oracle = make_oracle(sphere);
  auto cfg = small_config();
  cfg.iterations = 60;
  const auto init = init_completion_gaussians(sphere, cfg);
  const auto res = run_zfc(sphere, *oracle, cfg);
  const auto before = chamfer_l1(concat(init.centers, sphere.points), sphere.points);
  const auto after = chamfer_l1(concat(res.g_m.centers, sphere.points), sphere.points);
  EXPECT_LE(after, before);
}

TEST(RunZfc, RetriesTransportFailures) {
  mock::EchoServer server;
  BridgeProvider bridge(BridgeAddress{"127.0.0.1", server.port()}, 2000);
  const auto hemi = hemisphere(100, 12);
  auto cfg = small_config();
  cfg.iterations = 5;
  server.fail_next(2);
  const auto res = run_zfc(hemi, bridge, cfg);
  EXPECT_EQ(res.history.size(), 5u);
  EXPECT_EQ(server.requests_seen(), 7);
}

TEST(RunZfc, DumpsStateWhenRetriesRunOut) {
  mock::EchoServer server;
  BridgeProvider bridge(BridgeAddress{"127.0.0.1", server.port()}, 2000);
  const auto hemi = hemisphere(100, 13);
  auto cfg = small_config();
  std::filesystem::remove_all(cfg.checkpoint_dir);
  server.drop_next(4);
  EXPECT_THROW(run_zfc(hemi, bridge, cfg), TransportError);
  const auto dump = cfg.checkpoint_dir / "zfc_partial_0.ply";
  ASSERT_TRUE(std::filesystem::exists(dump));
  const auto sets = read_checkpoint(dump);
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_TRUE(sets[0].frozen);
  EXPECT_EQ(sets[0].size(), hemi.size());
  std::filesystem::remove_all(cfg.checkpoint_dir);
}

TEST(RunZfc, ContractViolationAbortsWithoutRetry) {
  mock::EchoServer server;
  BridgeProvider bridge(BridgeAddress{"127.0.0.1", server.port()}, 2000);
  const auto hemi = hemisphere(100, 14);
  auto cfg = small_config();
  std::vector<float> grad(32 * 32 * 3, 0.0f);
  grad[5] = std::numeric_limits<float>::quiet_NaN();
  server.program(grad, 1.0f);
  EXPECT_THROW(run_zfc(hemi, bridge, cfg), GuidanceContractError);
  EXPECT_EQ(server.requests_seen(), 1);
  std::filesystem::remove_all(cfg.checkpoint_dir);
}
