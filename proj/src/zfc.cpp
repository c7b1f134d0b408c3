#include "compc/zfc.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "compc/adam.hpp"
#include "compc/error.hpp"
#include "compc/kdtree.hpp"
#include "compc/metrics.hpp"
#include "compc/ply_io.hpp"
#include "compc/sampling.hpp"
#include "compc/visibility.hpp"

namespace compc::zfc {

void ZfcConfig::validate() const {
  require(iterations >= 1, "zfc: iterations must be >= 1");
  require(w0 >= 0 && w1 >= 0 && w2 >= 0, "zfc: weights must be nonnegative");
  require(sigma_n >= 0, "zfc: sigma_n must be nonnegative");
  require(delta > 0 && delta < 0.5, "zfc: delta must lie in (0, 0.5)");
  require(candidate_views >= 1, "zfc: need at least one candidate view");
  require(render_size >= 8, "zfc: render size must be >= 8");
  require(lr_centers >= 0 && lr_opacity >= 0 && lr_scale >= 0 && lr_colors >= 0, "zfc: negative learning rate");
  require(transport_retries >= 0, "zfc: negative retry count");
  render_intrinsics().validate();
}

CameraIntrinsics ZfcConfig::render_intrinsics() const {
  return CameraIntrinsics{render_size, render_size, fov_deg, 0.01, 100.0};
}

GaussianSet init_partial_gaussians(const PointCloud& p_in) { return input_gaussians(p_in); }

GaussianSet init_completion_gaussians(const PointCloud& p_in, const ZfcConfig& cfg) {
  require(!p_in.empty(), "init_completion_gaussians: empty input");
  const std::size_t n = p_in.size();
  const std::size_t m = cfg.completion_count == 0 ? n : cfg.completion_count;
  std::mt19937_64 rng(cfg.seed ^ 0x6d5f696e6974ULL);

  std::vector<Vec3> centers;
  if (m == n) {
    centers = p_in.points;
  } else if (m < n) {
    centers = farthest_point_sample(p_in.points, m, cfg.seed);
  } else {
    centers = p_in.points;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (centers.size() < m) centers.push_back(p_in.points[pick(rng)]);
  }
  if (cfg.sigma_n > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.sigma_n);
    for (auto& c : centers) c += Vec3(noise(rng), noise(rng), noise(rng));
  }

  GaussianSet g;
  g.centers = std::move(centers);
  g.scale = g.size() >= 2 ? mean_nearest_neighbor_distance(g.centers) : 0.0;
  if (!(g.scale > 0.0)) g.scale = n >= 2 ? mean_nearest_neighbor_distance(p_in.points) : 0.01;
  if (!(g.scale > 0.0)) g.scale = 0.01;
  g.opacity_logits.assign(g.size(), logit(0.9));
  g.colors.assign(g.size(), Vec3::Constant(0.5));
  g.frozen = false;
  return g;
}

PreservationResult preservation_loss(std::span<const GaussianSet> sets, std::span<const Vec3> p_in,
                                     const CameraPose& reference, const CameraIntrinsics& intr, double w2) {
  require(!p_in.empty(), "preservation_loss: empty input cloud");
  PreservationResult out;
  std::vector<Vec3> centers;
  std::vector<double> radii;
  std::vector<std::pair<std::size_t, std::size_t>> owner;  // (set, local index)
  for (std::size_t s = 0; s < sets.size(); ++s) {
    out.d_centers.emplace_back(sets[s].size(), Vec3::Zero());
    for (std::size_t i = 0; i < sets[s].size(); ++i) {
      centers.push_back(sets[s].centers[i]);
      radii.push_back(sets[s].scale);
      owner.emplace_back(s, i);
    }
  }
  if (centers.empty()) return out;
  const auto visible = frontmost_filter(centers, radii, reference, intr);
  out.selected = visible.size();
  if (visible.empty()) {
    spdlog::warn("preservation_loss: nothing visible from the reference view");
    return out;
  }
  std::vector<Vec3> pre;
  pre.reserve(visible.size());
  for (auto k : visible) pre.push_back(centers[k]);
  const auto cd = chamfer_l1_with_grad(pre, p_in);
  out.value = w2 * cd.value;
  for (std::size_t j = 0; j < visible.size(); ++j) {
    const auto [s, i] = owner[visible[j]];
    if (!sets[s].frozen) out.d_centers[s][i] = w2 * cd.d_a[j];
  }
  return out;
}

RegularizerResult scaling_regularizer(double scale, double w1) {
  const double sign = scale > 0.0 ? 1.0 : (scale < 0.0 ? -1.0 : 0.0);
  return {w1 * std::abs(scale), w1 * sign};
}

CameraPose sample_training_pose(const CameraPose& reference, const ZfcConfig& cfg, std::uint64_t seed,
                                std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), 0x7631u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> az(-cfg.azimuth_range_deg, cfg.azimuth_range_deg);
  std::uniform_real_distribution<double> el(-cfg.elevation_range_deg, cfg.elevation_range_deg);
  const double d_az = az(rng);
  const double d_el = el(rng);
  return reference.offset(d_el, d_az, 0.0);
}

namespace {

std::filesystem::path dump_state(const ZfcConfig& cfg, std::span<const GaussianSet> sets, int iteration) {
  const auto dir = cfg.checkpoint_dir.empty() ? std::filesystem::temp_directory_path() : cfg.checkpoint_dir;
  std::filesystem::create_directories(dir);
  const auto path = dir / ("zfc_partial_" + std::to_string(iteration) + ".ply");
  write_checkpoint(path, sets, cfg.delta);
  return path;
}

GuidanceResponse request_with_retry(GuidanceProvider& provider, const GuidanceRequest& request, const ZfcConfig& cfg,
                                    std::span<const GaussianSet> sets, int iteration) {
  for (int attempt = 0;; ++attempt) {
    try {
      auto response = provider.image_gradient(request);
      check_response(request, response);
      return response;
    } catch (const TransportError& e) {
      if (attempt < cfg.transport_retries) {
        spdlog::warn("guidance {} failed at iteration {} (attempt {}): {}", provider.name(), iteration, attempt + 1,
                     e.what());
        continue;
      }
      const auto path = dump_state(cfg, sets, iteration);
      throw TransportError(std::string(e.what()) + "; partial state written to " + path.string());
    } catch (const GuidanceContractError& e) {
      const auto path = dump_state(cfg, sets, iteration);
      throw GuidanceContractError(std::string(e.what()) + "; partial state written to " + path.string());
    }
  }
}

}  // namespace

ZfcResult run_zfc(const PointCloud& p_in, GuidanceProvider& provider, const ZfcConfig& cfg,
                  const ZfcObserver& observer) {
  cfg.validate();
  require(p_in.size() >= 2, "run_zfc: need at least two input points");

  ZfcResult res;
  res.g_in = init_partial_gaussians(p_in);
  res.intrinsics = cfg.render_intrinsics();

  const Orbit orbit = default_orbit(p_in.points);
  const auto candidates = fibonacci_sphere_poses(cfg.candidate_views, orbit.radius, orbit.target);
  const auto estimate =
      estimate_reference_viewpoint(p_in.points, candidates, visibility_intrinsics(), cfg.w0, res.g_in.scale);
  res.reference = estimate.pose;
  spdlog::debug("reference view: elevation {:.1f} azimuth {:.1f} radius {:.3f}", res.reference.elevation_deg,
                res.reference.azimuth_deg, res.reference.radius);

  const RenderOptions ropt{Vec3::Ones(), 3.0, 0.999, cfg.delta, true};
  res.reference_image = render(res.g_in, res.reference, res.intrinsics, ropt);
  provider.bind_reference(res.reference, res.intrinsics);

  res.g_m = init_completion_gaussians(p_in, cfg);
  GaussianSet& gm = res.g_m;
  const std::size_t m = gm.size();

  Adam adam_centers(3 * m, {cfg.lr_centers, cfg.beta1, cfg.beta2, cfg.adam_epsilon});
  Adam adam_logits(m, {cfg.lr_opacity, cfg.beta1, cfg.beta2, cfg.adam_epsilon});
  Adam adam_colors(3 * m, {cfg.lr_colors, cfg.beta1, cfg.beta2, cfg.adam_epsilon});
  Adam adam_scale(1, {cfg.lr_scale, cfg.beta1, cfg.beta2, cfg.adam_epsilon});

  std::vector<double> centers_flat(3 * m), colors_flat(3 * m), g_centers(3 * m), g_colors(3 * m), g_logits(m);
  std::vector<GaussianSet> sets(2);
  const CameraIntrinsics vis = visibility_intrinsics();

  for (int it = 0; it < cfg.iterations; ++it) {
    sets[0] = res.g_in;
    sets[1] = gm;
    const std::span<const GaussianSet> all(sets);
    const CameraPose view = sample_training_pose(res.reference, cfg, cfg.seed, static_cast<std::uint64_t>(it));

    const Rasterizer raster(all, view, res.intrinsics, ropt);
    GuidanceRequest request;
    request.width = res.intrinsics.width;
    request.height = res.intrinsics.height;
    request.reference_image = res.reference_image.color;
    request.current_image = raster.image().color;
    request.relative_pose = {view.elevation_deg - res.reference.elevation_deg,
                             view.azimuth_deg - res.reference.azimuth_deg, 0.0};
    request.step_fraction = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 1.0;
    GuidanceResponse response = request_with_retry(provider, request, cfg, all, it);

    ZfcStep step;
    step.iteration = it;
    double norm2 = 0.0;
    for (auto& v : response.grad_image) {
      v *= response.weight;
      norm2 += v * v;
    }
    step.guidance_norm = std::sqrt(norm2);
    const auto grads = raster.backward(response.grad_image);
    const RenderGradients& gg = grads[1];

    const auto pres = preservation_loss(all, p_in.points, res.reference, vis, cfg.w2);
    const auto reg = scaling_regularizer(gm.scale, cfg.w1);
    step.preservation = pres.value;
    step.regularizer = reg.value;

    for (std::size_t i = 0; i < m; ++i)
      for (int c = 0; c < 3; ++c) {
        g_centers[3 * i + c] = gg.d_centers[i][c] + pres.d_centers[1][i][c];
        g_colors[3 * i + c] = gg.d_colors[i][c];
        centers_flat[3 * i + c] = gm.centers[i][c];
        colors_flat[3 * i + c] = gm.colors[i][c];
      }
    if (cfg.max_grad_norm > 0.0) {
      double n2 = 0.0;
      for (double v : g_centers) n2 += v * v;
      const double n = std::sqrt(n2);
      if (n > cfg.max_grad_norm)
        for (double& v : g_centers) v *= cfg.max_grad_norm / n;
    }
    for (std::size_t i = 0; i < m; ++i) g_logits[i] = gg.d_opacity_logits[i];

    adam_centers.step(centers_flat, g_centers);
    adam_colors.step(colors_flat, g_colors);
    adam_logits.step(gm.opacity_logits, g_logits);
    // Scale is stepped in log space so it stays positive.
    double log_scale = std::log(gm.scale);
    const double g_log_scale = (gg.d_scale + reg.d_scale) * gm.scale;
    adam_scale.step(std::span<double>(&log_scale, 1), std::span<const double>(&g_log_scale, 1));
    gm.scale = std::exp(log_scale);

    for (std::size_t i = 0; i < m; ++i)
      for (int c = 0; c < 3; ++c) {
        gm.centers[i][c] = centers_flat[3 * i + c];
        gm.colors[i][c] = std::clamp(colors_flat[3 * i + c], 0.0, 1.0);
      }

    step.scale = gm.scale;
    for (std::size_t i = 0; i < m; ++i) step.active += gm.opacity(i, cfg.delta) == 1.0;
    res.history.push_back(step);
    if (it % 100 == 0 || it + 1 == cfg.iterations)
      spdlog::debug("zfc {:5d}  guidance {:.4g}  preservation {:.4g}  scale {:.4g}  active {}/{}", it,
                    step.guidance_norm, step.preservation, step.scale, step.active, m);
    if (observer) observer(step, res.g_in, gm);
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() && (it + 1) % cfg.checkpoint_every == 0) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      const GaussianSet pair[2] = {res.g_in, gm};
      write_checkpoint(cfg.checkpoint_dir / ("zfc_" + std::to_string(it + 1) + ".ply"), pair, cfg.delta);
    }
  }
  return res;
}

void write_checkpoint(const std::filesystem::path& path, std::span<const GaussianSet> sets, double delta) {
  std::vector<io::PlyProperty> props{{"x", "float", {}},  {"y", "float", {}},       {"z", "float", {}},
                                     {"nx", "float", {}}, {"ny", "float", {}},      {"nz", "float", {}},
                                     {"opacity", "float", {}}, {"frozen", "uchar", {}}};
  std::vector<std::string> comments;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto& g = sets[s];
    std::ostringstream c;
    c.precision(17);
    c << "set " << s << " count " << g.size() << " scale " << g.scale << " frozen " << (g.frozen ? 1 : 0);
    comments.push_back(c.str());
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        props[k].values.push_back(g.centers[i][k]);
        props[3 + k].values.push_back(2.0 * g.colors[i][k] - 1.0);
      }
      props[6].values.push_back(g.opacity(i, delta));
      props[7].values.push_back(g.frozen ? 1.0 : 0.0);
    }
  }
  io::write_ply(path, props, comments);
}

std::vector<GaussianSet> read_checkpoint(const std::filesystem::path& path) {
  const auto ply = io::read_ply(path);
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "opacity", "frozen"})
    if (!ply.has(name)) throw IoError("checkpoint " + path.string() + " lacks property " + name);
  std::vector<GaussianSet> sets;
  std::size_t offset = 0;
  for (const auto& comment : ply.comments) {
    std::istringstream in(comment);
    std::string w_set, w_count, w_scale, w_frozen;
    std::size_t index = 0, count = 0;
    double scale = 0.0;
    int frozen = 0;
    if (!(in >> w_set >> index >> w_count >> count >> w_scale >> scale >> w_frozen >> frozen) || w_set != "set")
      continue;
    if (offset + count > ply.vertex_count) throw IoError("checkpoint " + path.string() + ": counts exceed vertices");
    GaussianSet g;
    g.scale = scale;
    g.frozen = frozen != 0;
    for (std::size_t i = offset; i < offset + count; ++i) {
      g.centers.emplace_back(ply.vertex.at("x")[i], ply.vertex.at("y")[i], ply.vertex.at("z")[i]);
      const Vec3 n(ply.vertex.at("nx")[i], ply.vertex.at("ny")[i], ply.vertex.at("nz")[i]);
      g.colors.push_back(((n + Vec3::Ones()) / 2.0).cwiseMax(0.0).cwiseMin(1.0));
      g.opacity_logits.push_back(ply.vertex.at("opacity")[i] > 0.5 ? kOpaqueLogit : logit(0.1));
    }
    offset += count;
    sets.push_back(std::move(g));
  }
  if (sets.empty()) throw IoError("checkpoint " + path.string() + " has no set comments");
  return sets;
}

}  // namespace compc::zfc
