#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "compc/camera.hpp"
#include "compc/gaussians.hpp"
#include "compc/kdtree.hpp"
#include "compc/point_cloud.hpp"
#include "compc/visibility.hpp"

namespace compc::pce {

// Anything that can report g(p) and, optionally, its spatial gradient.
class ScalarField {
 public:
  virtual ~ScalarField() = default;
  // grads may be empty, otherwise it has one slot per point.
  virtual void evaluate(std::span<const Vec3> points, std::span<double> values, std::span<Vec3> grads) const = 0;
};

struct SdfShape {
  int hidden_layers = 4;
  int width = 64;
  int skip_layer = 2;          // this hidden layer also receives the input (scaled by 1/sqrt 2)
  double init_radius = 0.25;   // geometric init: g starts close to |p - centre| - init_radius
};

// ReLU MLP g: R^3 -> R. Parameters live in one flat vector; per-layer views
// index into it.
class SdfNetwork final : public ScalarField {
 public:
  SdfNetwork() = default;
  SdfNetwork(const SdfShape& shape, const Vec3& centre, std::uint64_t seed);

  const SdfShape& shape() const { return shape_; }
  const Vec3& centre() const { return centre_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  void evaluate(std::span<const Vec3> points, std::span<double> values, std::span<Vec3> grads) const override;

  // Gradient of sum_i (d_value[i] * g(p_i) + d_grad[i] . grad g(p_i)) with
  // respect to the parameters; also returns g and grad g at the points.
  struct Backward {
    std::vector<double> values;
    std::vector<Vec3> grads;
  };
  // Two-phase use: forward() caches activations for the batch; backward() then
  // consumes upstream sensitivities.
  Backward forward(std::span<const Vec3> points);
  std::vector<double> backward(std::span<const double> d_value, std::span<const Vec3> d_grad) const;

  // Flat float32 little-endian blob: "CSDF", u32 version, u32 hidden_layers,
  // u32 width, u32 skip_layer, f32 centre[3], u64 parameter count, then weights.
  void save(const std::filesystem::path& path) const;
  static SdfNetwork load(const std::filesystem::path& path);

 private:
  struct Layer {
    std::size_t w_offset, b_offset;
    int rows, cols;
  };
  struct Weights {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
  };
  int input_width(int layer) const;
  Weights unpack() const;

  SdfShape shape_;
  Vec3 centre_ = Vec3::Zero();
  std::vector<double> params_;
  std::vector<Layer> layers_;  // hidden layers then the output layer

  // forward() cache: inputs to each layer and ReLU masks, one column per point.
  std::vector<Eigen::MatrixXd> inputs_;
  std::vector<Eigen::MatrixXd> masks_;
  Eigen::MatrixXd x_;
  Weights weights_;
};

// p - g(p) grad g(p) / |grad g(p)|; p unchanged where |grad g| < 1e-8.
Vec3 pull_point(const Vec3& p, double g, const Vec3& grad);
std::vector<Vec3> pull(const ScalarField& field, std::span<const Vec3> points);

// chamfer_l1(pull(field, samples), target).
double pull_loss(const ScalarField& field, std::span<const Vec3> samples, std::span<const Vec3> target);

struct MergeState {
  double raw = 0.0;  // sigma = softplus(raw)
  double w3 = 0.1;
  static MergeState with_sigma(double sigma, double w3 = 0.1);
  double sigma() const;
};

// e^{-d/sigma} P_in[nn] + (1 - e^{-d/sigma}) p for each pulled point p with
// nearest input point P_in[nn] at distance d.
std::vector<Vec3> merge_layer(double sigma, std::span<const Vec3> pulled, std::span<const Vec3> p_in);

struct GridPullingConfig {
  int iterations = 5000;
  double sigma0 = 0.005;          // std of the near samples
  std::size_t near_batch = 1000;
  std::size_t far_batch = 1000;
  double padding = 0.05;          // far samples come from the bounding box grown by this fraction
  double learning_rate = 1e-3;
  double merge_learning_rate = 1e-3;
  double sigma_init = 0.01;
  double w3 = 0.1;
  SdfShape shape;
  std::uint64_t seed = 0;
};

struct GridPullingLoss {
  double far = 0.0, near = 0.0, merge = 0.0;  // merge includes w3 * sigma
  std::vector<double> d_params;
  double d_raw = 0.0;  // with respect to MergeState::raw
  double total() const { return far + near + merge; }
};

// L_far + L_near + L_mer for one batch and its gradient. L_mer merges the
// pulled near samples with P_in. Runs net.forward() on near ++ far.
GridPullingLoss grid_pulling_loss(SdfNetwork& net, const MergeState& merge, std::span<const Vec3> near,
                                  std::span<const Vec3> far, std::span<const Vec3> p_surf, const KdTree& surf_tree,
                                  std::span<const Vec3> p_in, const KdTree& in_tree);

struct GridPullingLog {
  int iteration;
  double far, near, merge, sigma;
};

struct GridPullingResult {
  SdfNetwork network;
  MergeState merge;
  std::vector<GridPullingLog> history;
};

using GridPullingObserver = std::function<void(const GridPullingLog&)>;

GridPullingResult train_grid_pulling(std::span<const Vec3> p_surf, std::span<const Vec3> p_in,
                                     const GridPullingConfig& cfg, const GridPullingObserver& observer = {});

struct GridConfig {
  int resolution = 128;
  Aabb bounds;

  // Bounding box of the points grown by `margin` of its extent on every side.
  static GridConfig around(std::span<const Vec3> points, int resolution = 128, double margin = 0.05);
  Vec3 cell_size() const;
  double cell_diagonal() const;
  Vec3 vertex(int i, int j, int k) const;
  void validate() const;
};

// Grid vertices with |g| < 0.5 r (r = cell diagonal), in scan order.
std::vector<Vec3> select_band(const ScalarField& field, const GridConfig& grid);

// Band vertices pulled onto the level set and merged with P_in.
PointCloud extract_uniform_points(const ScalarField& field, double sigma, std::span<const Vec3> p_in,
                                  const GridConfig& grid);

// Centres of opacity-passing Gaussians that are frontmost (footprint = set
// scale) in at least one of n_views Fibonacci views on the default orbit.
PointCloud gaussian_surface_extraction(std::span<const GaussianSet> sets, std::size_t n_views = 500,
                                       const CameraIntrinsics& intr = visibility_intrinsics(),
                                       double delta = kOpacityFloor);

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> faces;
};

// Zero isosurface of the field on the grid, vertices welded along shared
// edges, faces wound so their normals follow grad g.
TriangleMesh marching_cubes_mesh(const ScalarField& field, const GridConfig& grid);

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::filesystem::path& path);

// Full extraction: surface Gaussians, SDF fit, band resampling.
struct PceConfig {
  std::size_t views = 500;
  GridPullingConfig pulling;
  int grid_resolution = 128;
  double grid_margin = 0.05;
};

struct PceResult {
  PointCloud p_surf;
  PointCloud p_out;
  GridPullingResult fit;
  GridConfig grid;
};

PceResult run_pce(std::span<const GaussianSet> sets, std::span<const Vec3> p_in, const PceConfig& cfg,
                  const GridPullingObserver& observer = {});

}  // namespace compc::pce
