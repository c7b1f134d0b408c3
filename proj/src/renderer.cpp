#include "compc/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "compc/error.hpp"

namespace compc {

Rasterizer::Rasterizer(std::span<const GaussianSet> sets, const CameraPose& pose, const CameraIntrinsics& intr,
                       const RenderOptions& options)
    : sets_(sets), frame_(pose.frame()), intr_(intr), options_(options) {
  intr_.validate();
  const double focal = intr_.focal_px();
  const int w = intr_.width, h = intr_.height;

  for (std::uint32_t s = 0; s < sets_.size(); ++s) {
    const auto& set = sets_[s];
    require(set.scale > 0.0, "render: scale must be positive");
    require(set.opacity_logits.size() == set.size() && set.colors.size() == set.size(),
            "render: GaussianSet attribute lengths differ");
    for (std::uint32_t i = 0; i < set.size(); ++i) {
      set_of_.push_back(s);
      local_of_.push_back(i);
      Splat sp;
      const Vec3 c = frame_.to_camera(set.centers[i]);
      sp.x = c.x();
      sp.y = c.y();
      sp.z = c.z();
      if (sp.z > intr_.near && sp.z < intr_.far) {
        sp.u = 0.5 * w + focal * sp.x / sp.z;
        sp.v = 0.5 * h - focal * sp.y / sp.z;
        sp.sigma = set.scale * focal / sp.z;
        sp.opacity = options_.binarize ? set.opacity(i, options_.delta) : sigmoid(set.opacity_logits[i]);
        sp.visible = true;
      }
      splats_.push_back(sp);
    }
  }

  // Pixel rectangle covered by the truncated footprint; empty when off-screen.
  auto bounds = [&](const Splat& sp, long& x0, long& x1, long& y0, long& y1) {
    const double r = options_.truncation_sigmas * sp.sigma;
    x0 = std::max(0L, static_cast<long>(std::ceil(sp.u - r - 0.5)));
    x1 = std::min(static_cast<long>(w) - 1, static_cast<long>(std::floor(sp.u + r - 0.5)));
    y0 = std::max(0L, static_cast<long>(std::ceil(sp.v - r - 0.5)));
    y1 = std::min(static_cast<long>(h) - 1, static_cast<long>(std::floor(sp.v + r - 0.5)));
    return x0 <= x1 && y0 <= y1;
  };
  const double cut2 = options_.truncation_sigmas * options_.truncation_sigmas;
  // With q = d^2 / (2 sigma^2) and qc = q at the cut, the footprint weight is
  // (exp(-q) - f (1 + qc - q)) / (1 - f (1 + qc)), f = exp(-qc): 1 at the centre,
  // value and slope both 0 at the cut.
  const double qc = 0.5 * cut2;
  const double f = std::exp(-qc);
  const double norm = 1.0 / (1.0 - f * (1.0 + qc));

  // Two passes: count fragments per pixel, then fill (CSR layout).
  const std::size_t npix = static_cast<std::size_t>(w) * h;
  pixel_offsets_.assign(npix + 1, 0);
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<std::size_t> cursor;
    if (pass == 1) {
      for (std::size_t k = 0; k < npix; ++k) pixel_offsets_[k + 1] += pixel_offsets_[k];
      fragments_.resize(pixel_offsets_[npix]);
      cursor.assign(pixel_offsets_.begin(), pixel_offsets_.end() - 1);
    }
    for (std::uint32_t id = 0; id < splats_.size(); ++id) {
      const Splat& sp = splats_[id];
      long x0, x1, y0, y1;
      if (!sp.visible || !bounds(sp, x0, x1, y0, y1)) continue;
      const double inv2s2 = 1.0 / (2.0 * sp.sigma * sp.sigma);
      for (long y = y0; y <= y1; ++y) {
        const double dy = y + 0.5 - sp.v;
        for (long x = x0; x <= x1; ++x) {
          const double dx = x + 0.5 - sp.u;
          const double d2 = dx * dx + dy * dy;
          if (d2 > cut2 * sp.sigma * sp.sigma) continue;
          const std::size_t k = static_cast<std::size_t>(y) * w + x;
          if (pass == 0) {
            ++pixel_offsets_[k + 1];
          } else {
            const double q = d2 * inv2s2, e = std::exp(-q);
            fragments_[cursor[k]++] = {sp.z, id, (e - f * (1.0 + qc - q)) * norm, (e - f) * norm};
          }
        }
      }
    }
  }

  image_.width = w;
  image_.height = h;
  image_.color.assign(3 * npix, 0.0);
  image_.depth.assign(npix, intr_.far);
  image_.alpha.assign(npix, 0.0);
  for (std::size_t k = 0; k < npix; ++k) {
    auto first = fragments_.begin() + static_cast<std::ptrdiff_t>(pixel_offsets_[k]);
    auto last = fragments_.begin() + static_cast<std::ptrdiff_t>(pixel_offsets_[k + 1]);
    std::sort(first, last, [](const Fragment& a, const Fragment& b) {
      return a.depth < b.depth || (a.depth == b.depth && a.id < b.id);
    });
    double t = 1.0, depth_acc = 0.0;
    Vec3 c = Vec3::Zero();
    for (auto it = first; it != last; ++it) {
      const double a = fragment_alpha(*it);
      const double wgt = a * t;
      c += wgt * sets_[set_of_[it->id]].colors[local_of_[it->id]];
      depth_acc += wgt * it->depth;
      t *= 1.0 - a;
    }
    c += t * options_.background;
    image_.color[3 * k] = c.x();
    image_.color[3 * k + 1] = c.y();
    image_.color[3 * k + 2] = c.z();
    image_.alpha[k] = 1.0 - t;
    if (1.0 - t > 1e-12) image_.depth[k] = depth_acc / (1.0 - t);
  }
}

double Rasterizer::fragment_alpha(const Fragment& f) const {
  return std::min(splats_[f.id].opacity * f.gauss, options_.alpha_max);
}

long Rasterizer::dominant_gaussian(int x, int y) const {
  const std::size_t k = static_cast<std::size_t>(y) * intr_.width + x;
  double t = 1.0, best = 0.0;
  long id = -1;
  for (std::size_t f = pixel_offsets_[k]; f < pixel_offsets_[k + 1]; ++f) {
    const double a = fragment_alpha(fragments_[f]);
    if (a * t > best) {
      best = a * t;
      id = fragments_[f].id;
    }
    t *= 1.0 - a;
  }
  return id;
}

std::vector<RenderGradients> Rasterizer::backward(std::span<const double> d_color) const {
  const std::size_t npix = image_.pixel_count();
  require(d_color.size() == 3 * npix, "render_backward: gradient image has wrong size");

  // Per-splat accumulators in image space.
  std::vector<double> g_u(splats_.size(), 0.0), g_v(splats_.size(), 0.0), g_sigma(splats_.size(), 0.0),
      g_opacity(splats_.size(), 0.0);
  std::vector<Vec3> g_color(splats_.size(), Vec3::Zero());
  std::vector<double> trans;

  for (std::size_t k = 0; k < npix; ++k) {
    const std::size_t begin = pixel_offsets_[k], end = pixel_offsets_[k + 1];
    if (begin == end) continue;
    const Vec3 g(d_color[3 * k], d_color[3 * k + 1], d_color[3 * k + 2]);
    if (g.isZero(0.0)) continue;

    trans.resize(end - begin + 1);
    trans[0] = 1.0;
    for (std::size_t f = begin; f < end; ++f) trans[f - begin + 1] = trans[f - begin] * (1.0 - fragment_alpha(fragments_[f]));

    const double px = static_cast<double>(k % intr_.width) + 0.5;
    const double py = static_cast<double>(k / intr_.width) + 0.5;
    // Colour contributed by everything behind the current fragment, background included.
    Vec3 behind = trans[end - begin] * options_.background;
    for (std::size_t f = end; f-- > begin;) {
      const Fragment& fr = fragments_[f];
      const Splat& sp = splats_[fr.id];
      const double t = trans[f - begin];
      const double raw = sp.opacity * fr.gauss;
      const double a = std::min(raw, options_.alpha_max);
      const Vec3& col = sets_[set_of_[fr.id]].colors[local_of_[fr.id]];

      g_color[fr.id] += g * (a * t);
      const double d_alpha = g.dot(col * t - behind / (1.0 - a));
      behind += col * (a * t);

      if (raw >= options_.alpha_max) continue;  // clamped: no gradient through alpha
      g_opacity[fr.id] += d_alpha * fr.gauss;
      const double d_gauss = d_alpha * sp.opacity * fr.slope;  // -dL/dq
      const double s2 = sp.sigma * sp.sigma;
      const double dx = px - sp.u, dy = py - sp.v;
      g_u[fr.id] += d_gauss * dx / s2;
      g_v[fr.id] += d_gauss * dy / s2;
      g_sigma[fr.id] += d_gauss * (dx * dx + dy * dy) / (s2 * sp.sigma);
    }
  }

  std::vector<RenderGradients> out;
  out.reserve(sets_.size());
  for (const auto& set : sets_) out.emplace_back(set.size());

  const double focal = intr_.focal_px();
  for (std::size_t id = 0; id < splats_.size(); ++id) {
    const Splat& sp = splats_[id];
    const auto s = set_of_[id];
    if (!sp.visible || sets_[s].frozen) continue;
    const auto i = local_of_[id];
    const auto& set = sets_[s];
    RenderGradients& rg = out[s];
    const double z = sp.z, z2 = z * z;
    const Vec3 du = focal * (frame_.right / z - sp.x * frame_.forward / z2);
    const Vec3 dv = -focal * (frame_.up / z - sp.y * frame_.forward / z2);
    const Vec3 dsigma = -set.scale * focal * frame_.forward / z2;
    rg.d_centers[i] += g_u[id] * du + g_v[id] * dv + g_sigma[id] * dsigma;
    rg.d_scale += g_sigma[id] * focal / z;
    rg.d_opacity_logits[i] += g_opacity[id] * binarize_opacity(set.opacity_logits[i], options_.delta).d_logit;
    rg.d_colors[i] += g_color[id];
  }
  return out;
}

RenderedImage render(std::span<const GaussianSet> sets, const CameraPose& pose, const CameraIntrinsics& intr,
                     const RenderOptions& options) {
  return Rasterizer(sets, pose, intr, options).image();
}

RenderedImage render(const GaussianSet& set, const CameraPose& pose, const CameraIntrinsics& intr,
                     const RenderOptions& options) {
  return render(std::span<const GaussianSet>(&set, 1), pose, intr, options);
}

std::vector<RenderGradients> render_backward(std::span<const GaussianSet> sets, const CameraPose& pose,
                                             const CameraIntrinsics& intr, std::span<const double> d_color,
                                             const RenderOptions& options) {
  return Rasterizer(sets, pose, intr, options).backward(d_color);
}

}  // namespace compc
