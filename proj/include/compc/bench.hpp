#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "compc/camera.hpp"
#include "compc/pce.hpp"
#include "compc/point_cloud.hpp"

namespace compc::bench {

using pce::TriangleMesh;

// Closed test meshes, outward winding.
TriangleMesh make_uv_sphere(double radius, int stacks = 32, int slices = 64, const Vec3& centre = Vec3::Zero());
TriangleMesh make_box(const Vec3& half_extent, const Vec3& centre = Vec3::Zero());
TriangleMesh make_torus(double major, double minor, int rings = 48, int sides = 24, const Vec3& centre = Vec3::Zero());

// .obj, or .ply with a face element.
TriangleMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

double mesh_area(const TriangleMesh& mesh);
Aabb mesh_bounds(const TriangleMesh& mesh);

// Area-weighted uniform surface samples with face normals.
PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> depth;    // along the view axis, +inf where nothing was hit
  std::vector<int> face;        // -1 where nothing was hit
  CameraPose pose;
  CameraIntrinsics intrinsics;

  bool empty() const;
  // One point per hit pixel: the pixel-centre ray intersected with the hit face's plane.
  std::vector<Vec3> back_project(const TriangleMesh& mesh) const;
};

// Nearest surface along each pixel-centre ray (exact per-face ray intersection,
// accelerated by rasterising face bounding rectangles).
DepthMap render_depth(const TriangleMesh& mesh, const CameraPose& pose, const CameraIntrinsics& intr);

struct SynthConfig {
  double elevation_deg = 0.0;
  double first_azimuth_deg = -140.0;
  double azimuth_step_deg = 15.0;
  double fov_deg = 80.0;
  int depth_size = 256;
  double radius_factor = 2.0;      // camera distance = factor x bounding-sphere radius
  std::size_t resolution = 2048;   // working resolution after merging
};

// Camera i of the synthesis rig.
CameraPose synth_camera(const TriangleMesh& mesh, int i, const SynthConfig& cfg = {});

// Depth maps of k consecutive rig cameras, back-projected, merged, deduplicated
// within half the mean pixel footprint and farthest-point sampled to the
// working resolution. Throws PoseError when a view sees nothing.
PointCloud synth_partial_from_mesh(const TriangleMesh& mesh, int level, std::uint64_t seed,
                                   const SynthConfig& cfg = {});

// Per-coordinate N(0, std^2) perturbation.
PointCloud add_noise(const PointCloud& cloud, double stddev, std::uint64_t seed);

struct ResultRow {
  std::string object;
  std::uint64_t seed = 0;
  double cd_x100 = 0.0;
  double emd_x100 = 0.0;
  std::optional<double> tmd, uhd, mmd;
  double seconds = 0.0;
};

struct EvalOptions {
  std::size_t resolution = 16384;
  std::uint64_t seed = 0;
};

// Both clouds farthest-point sampled to the resolution (when larger), then
// chamfer_l1 and emd_approx, both x 100.
ResultRow evaluate(const PointCloud& pred, const PointCloud& gt, const EvalOptions& options = {});

struct MultimodalMetrics {
  double tmd = 0.0, uhd = 0.0, mmd = 0.0;  // all x 100
};

// TMD: mean pairwise chamfer_l1 among completions. UHD: mean over completions
// of the largest distance from a P_in point to the completion. MMD: smallest
// chamfer_l1 from a completion to gt.
MultimodalMetrics multimodal_metrics(std::span<const PointCloud> completions, const PointCloud& p_in,
                                     const PointCloud& gt);

enum class GuidanceMode { kOracle, kBridge };

GuidanceMode parse_guidance_mode(const std::string& text);

struct BenchmarkSpec {
  std::vector<std::filesystem::path> inputs;
  int level = 1;
  double noise = 0.0;
  std::size_t resolution = 16384;
  int repeats = 3;
  std::vector<std::uint64_t> seeds;  // empty: 0 .. repeats-1
  GuidanceMode guidance = GuidanceMode::kOracle;

  void validate() const;
  std::vector<std::uint64_t> run_seeds() const;
};

inline constexpr const char* kCsvHeader = "object,seed,cd_x100,emd_x100,tmd,uhd,mmd,seconds";

void write_csv(std::ostream& out, std::span<const ResultRow> rows);
void write_csv(const std::filesystem::path& path, std::span<const ResultRow> rows);
std::vector<ResultRow> read_csv(const std::filesystem::path& path);
// Space-aligned columns plus a final mean row.
void write_table(std::ostream& out, std::span<const ResultRow> rows);

// Runs job(i) for i in [0, n) on `workers` threads (0: hardware concurrency).
// Exceptions are collected and the one from the lowest index is rethrown after
// all jobs finish.
void run_pool(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

}  // namespace compc::bench
