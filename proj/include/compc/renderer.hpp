#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "compc/camera.hpp"
#include "compc/gaussians.hpp"

namespace compc {

struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<double> color;  // row-major H x W x 3
  std::vector<double> depth;  // H x W, alpha-weighted mean depth; `far` where nothing was hit
  std::vector<double> alpha;  // H x W

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  Vec3 pixel(int x, int y) const {
    const auto k = 3 * (static_cast<std::size_t>(y) * width + x);
    return {color[k], color[k + 1], color[k + 2]};
  }
};

// Gradients for one GaussianSet. All zero when the set is frozen.
struct RenderGradients {
  std::vector<Vec3> d_centers;
  double d_scale = 0.0;
  std::vector<double> d_opacity_logits;
  std::vector<Vec3> d_colors;

  explicit RenderGradients(std::size_t n = 0)
      : d_centers(n, Vec3::Zero()), d_opacity_logits(n, 0.0), d_colors(n, Vec3::Zero()) {}
};

struct RenderOptions {
  Vec3 background = Vec3::Ones();
  double truncation_sigmas = 3.0;
  double alpha_max = 0.999;
  double delta = kOpacityFloor;
  // false renders sigmoid(logit) directly (the continuous surrogate of the binarized path).
  bool binarize = true;
};

// Front-to-back alpha compositing of isotropic splats. Each Gaussian projects to
// a circular footprint with pixel std scale * focal / depth, truncated at
// truncation_sigmas (blended so value and slope vanish there); per pixel the fragments are sorted by (depth, global index).
// The rasterized fragment lists are kept so backward() can run without redoing
// the forward pass.
class Rasterizer {
 public:
  Rasterizer(std::span<const GaussianSet> sets, const CameraPose& pose, const CameraIntrinsics& intr,
             const RenderOptions& options = {});

  const RenderedImage& image() const { return image_; }

  // Reverse-mode gradients of L given dL/dcolor (H x W x 3), one entry per set.
  std::vector<RenderGradients> backward(std::span<const double> d_color) const;

  // Global index (sets concatenated) of the fragment with the largest
  // compositing weight at a pixel, or -1 for background.
  long dominant_gaussian(int x, int y) const;

 private:
  struct Splat {
    double u = 0, v = 0;   // projected centre, pixels
    double x = 0, y = 0, z = 0;  // camera coordinates
    double sigma = 0;      // footprint std, pixels
    double opacity = 0;
    bool visible = false;
  };
  struct Fragment {
    double depth;
    std::uint32_t id;
    double gauss;  // footprint weight
    double slope;  // -d(gauss)/dq, q = d^2 / (2 sigma^2)
  };

  double fragment_alpha(const Fragment& f) const;

  std::span<const GaussianSet> sets_;
  CameraFrame frame_;
  CameraIntrinsics intr_;
  RenderOptions options_;
  std::vector<std::uint32_t> set_of_;      // global id -> set index
  std::vector<std::uint32_t> local_of_;    // global id -> index inside its set
  std::vector<Splat> splats_;
  std::vector<std::size_t> pixel_offsets_; // CSR over pixels
  std::vector<Fragment> fragments_;
  RenderedImage image_;
};

RenderedImage render(std::span<const GaussianSet> sets, const CameraPose& pose, const CameraIntrinsics& intr,
                     const RenderOptions& options = {});
RenderedImage render(const GaussianSet& set, const CameraPose& pose, const CameraIntrinsics& intr,
                     const RenderOptions& options = {});

std::vector<RenderGradients> render_backward(std::span<const GaussianSet> sets, const CameraPose& pose,
                                             const CameraIntrinsics& intr, std::span<const double> d_color,
                                             const RenderOptions& options = {});

}  // namespace compc
