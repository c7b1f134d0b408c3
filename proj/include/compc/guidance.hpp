#pragma once

#include <memory>
#include <string>
#include <vector>

#include "compc/camera.hpp"
#include "compc/gaussians.hpp"
#include "compc/point_cloud.hpp"
#include "compc/renderer.hpp"

namespace compc {

// Offset of a training view V_i from the reference view V_p.
struct RelativePose {
  double d_elevation_deg = 0.0;
  double d_azimuth_deg = 0.0;
  double d_radius = 0.0;
};

struct GuidanceRequest {
  int width = 0;
  int height = 0;
  std::vector<double> reference_image;  // H x W x 3
  std::vector<double> current_image;    // H x W x 3
  RelativePose relative_pose;
  double step_fraction = 0.0;  // optimisation progress in [0, 1]
  void validate() const;
};

struct GuidanceResponse {
  std::vector<double> grad_image;  // dL/dI, H x W x 3
  double weight = 1.0;
};

// Source of image-space gradients for the completion loop. Calls are serial.
class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  // Announces the reference pose and intrinsics before the first request.
  virtual void bind_reference(const CameraPose& /*reference*/, const CameraIntrinsics& /*intr*/) {}
  // Throws TransportError when the provider is unreachable (retryable).
  virtual GuidanceResponse image_gradient(const GuidanceRequest& request) = 0;
  virtual std::string name() const = 0;
};

// Checks shape and finiteness; throws GuidanceContractError.
void check_response(const GuidanceRequest& request, const GuidanceResponse& response);

// Diffusion timestep annealed linearly from 0.98 at the start to 0.02 at the end.
double timestep_schedule(double step_fraction);

// Photometric stand-in for a diffusion model: renders a hidden ground-truth
// Gaussian set at the requested view and returns 2 (current - render).
class OracleProvider final : public GuidanceProvider {
 public:
  explicit OracleProvider(const PointCloud& ground_truth, const RenderOptions& options = {});
  void bind_reference(const CameraPose& reference, const CameraIntrinsics& intr) override;
  GuidanceResponse image_gradient(const GuidanceRequest& request) override;
  std::string name() const override { return "oracle"; }

  const GaussianSet& hidden() const { return hidden_; }
  // Ground-truth render at an absolute pose with the bound intrinsics resized to width x height.
  RenderedImage render_truth(const CameraPose& pose, int width, int height) const;

 private:
  GaussianSet hidden_;
  RenderOptions options_;
  CameraPose reference_;
  CameraIntrinsics intr_;
  bool bound_ = false;
};

// Always answers with a zero gradient.
class ZeroProvider final : public GuidanceProvider {
 public:
  GuidanceResponse image_gradient(const GuidanceRequest& request) override;
  std::string name() const override { return "zero"; }
};

std::unique_ptr<GuidanceProvider> make_oracle(const PointCloud& ground_truth);

}  // namespace compc
