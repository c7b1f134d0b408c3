#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "compc/camera.hpp"
#include "compc/gaussians.hpp"
#include "compc/guidance.hpp"
#include "compc/point_cloud.hpp"
#include "compc/renderer.hpp"

namespace compc::zfc {

struct ZfcConfig {
  int iterations = 1000;
  double w0 = 1e-3;       // depth weight of the reference-view objective
  double w1 = 1e3;        // scale regularizer
  double w2 = 1e2;        // preservation constraint
  double sigma_n = 0.05;  // noise of the completion-set initialisation
  double delta = kOpacityFloor;
  std::size_t completion_count = 0;  // |G_m|; 0 means |P_in|
  std::size_t candidate_views = 5000;
  double elevation_range_deg = 45.0;   // V_i elevation offset drawn from [-range, range]
  double azimuth_range_deg = 180.0;    // V_i azimuth offset drawn from [-range, range)
  int render_size = 64;               // training and reference images are square
  double fov_deg = 49.1;
  double lr_centers = 1e-3;
  double lr_opacity = 5e-2;
  double lr_scale = 5e-3;  // applied to log(scale)
  double lr_colors = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double max_grad_norm = 0.0;  // clamp of the G_m centre gradient block; 0 disables
  int transport_retries = 3;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;
  std::uint64_t seed = 0;

  void validate() const;
  CameraIntrinsics render_intrinsics() const;
};

// G_in: the input points as frozen, opaque, normal-coloured Gaussians.
GaussianSet init_partial_gaussians(const PointCloud& p_in);

// G_m: P_in resampled to the configured count and jittered with N(0, sigma_n^2),
// scale = mean NN distance of the jittered points, opacity 0.9, grey.
GaussianSet init_completion_gaussians(const PointCloud& p_in, const ZfcConfig& cfg);

struct PreservationResult {
  double value = 0.0;
  std::vector<std::vector<Vec3>> d_centers;  // one block per set; zeros for frozen sets
  std::size_t selected = 0;
};

// w2 * chamfer_l1(P_pre, P_in) with P_pre the centres kept by the frontmost
// filter from the reference view (footprint = each set's scale).
PreservationResult preservation_loss(std::span<const GaussianSet> sets, std::span<const Vec3> p_in,
                                     const CameraPose& reference, const CameraIntrinsics& intr, double w2);

struct RegularizerResult {
  double value = 0.0;
  double d_scale = 0.0;
};

// w1 * |scale|.
RegularizerResult scaling_regularizer(double scale, double w1);

// Random training view around the reference: azimuth and elevation offsets
// drawn uniformly, same radius and target. Deterministic per (seed, step).
CameraPose sample_training_pose(const CameraPose& reference, const ZfcConfig& cfg, std::uint64_t seed,
                                std::uint64_t step);

struct ZfcStep {
  int iteration = 0;
  double guidance_norm = 0.0;  // L2 norm of the weighted gradient image
  double preservation = 0.0;
  double regularizer = 0.0;
  double scale = 0.0;
  std::size_t active = 0;  // G_m members with binarized opacity 1
};

struct ZfcResult {
  GaussianSet g_in;
  GaussianSet g_m;
  CameraPose reference;
  CameraIntrinsics intrinsics;
  RenderedImage reference_image;
  std::vector<ZfcStep> history;
};

// Observer called after every iteration; used for progress output and tests.
using ZfcObserver = std::function<void(const ZfcStep&, const GaussianSet& g_in, const GaussianSet& g_m)>;

// Reference view estimation, initialisation and the completion loop. Only G_m
// is updated. Transport failures are retried cfg.transport_retries times; after
// that (or on a contract violation) the current state is written to
// checkpoint_dir (or the temp directory) and the error is rethrown.
ZfcResult run_zfc(const PointCloud& p_in, GuidanceProvider& provider, const ZfcConfig& cfg,
                  const ZfcObserver& observer = {});

// Binary PLY: x,y,z, nx,ny,nz (= 2 colour - 1), opacity (binarized), frozen;
// one header comment per set with its count and scale.
void write_checkpoint(const std::filesystem::path& path, std::span<const GaussianSet> sets, double delta = kOpacityFloor);
std::vector<GaussianSet> read_checkpoint(const std::filesystem::path& path);

}  // namespace compc::zfc
