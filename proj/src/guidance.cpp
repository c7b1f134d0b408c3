#include "compc/guidance.hpp"

#include <cmath>

#include "compc/error.hpp"

namespace compc {

void GuidanceRequest::validate() const {
  require(width > 0 && height > 0, "guidance request: empty image");
  const std::size_t n = 3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  require(reference_image.size() == n && current_image.size() == n, "guidance request: image size mismatch");
  require(step_fraction >= 0.0 && step_fraction <= 1.0, "guidance request: step_fraction outside [0, 1]");
}

void check_response(const GuidanceRequest& request, const GuidanceResponse& response) {
  if (response.grad_image.size() != request.current_image.size())
    throw GuidanceContractError("guidance response: gradient image has wrong size");
  if (!std::isfinite(response.weight) || response.weight < 0.0)
    throw GuidanceContractError("guidance response: weight must be finite and nonnegative");
  for (double v : response.grad_image)
    if (!std::isfinite(v)) throw GuidanceContractError("guidance response: non-finite gradient");
}

double timestep_schedule(double step_fraction) {
  require(step_fraction >= 0.0 && step_fraction <= 1.0, "timestep_schedule: step_fraction outside [0, 1]");
  return (1.0 - step_fraction) * 0.98 + step_fraction * 0.02;
}

OracleProvider::OracleProvider(const PointCloud& ground_truth, const RenderOptions& options)
    : hidden_(input_gaussians(ground_truth)), options_(options) {}

void OracleProvider::bind_reference(const CameraPose& reference, const CameraIntrinsics& intr) {
  intr.validate();
  reference_ = reference;
  intr_ = intr;
  bound_ = true;
}

RenderedImage OracleProvider::render_truth(const CameraPose& pose, int width, int height) const {
  CameraIntrinsics intr = intr_;
  intr.width = width;
  intr.height = height;
  return render(hidden_, pose, intr, options_);
}

GuidanceResponse OracleProvider::image_gradient(const GuidanceRequest& request) {
  require(bound_, "oracle provider: bind_reference must be called first");
  request.validate();
  const auto& rp = request.relative_pose;
  const CameraPose pose = reference_.offset(rp.d_elevation_deg, rp.d_azimuth_deg, rp.d_radius);
  const RenderedImage truth = render_truth(pose, request.width, request.height);
  GuidanceResponse out;
  out.grad_image.resize(request.current_image.size());
  for (std::size_t k = 0; k < out.grad_image.size(); ++k)
    out.grad_image[k] = 2.0 * (request.current_image[k] - truth.color[k]);
  return out;
}

GuidanceResponse ZeroProvider::image_gradient(const GuidanceRequest& request) {
  request.validate();
  GuidanceResponse out;
  out.grad_image.assign(request.current_image.size(), 0.0);
  return out;
}

std::unique_ptr<GuidanceProvider> make_oracle(const PointCloud& ground_truth) {
  return std::make_unique<OracleProvider>(ground_truth);
}

}  // namespace compc
