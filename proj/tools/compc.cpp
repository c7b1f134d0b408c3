#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>

#include "compc/bench.hpp"
#include "compc/bridge.hpp"
#include "compc/error.hpp"
#include "compc/image_io.hpp"
#include "compc/metrics.hpp"
#include "compc/pipeline.hpp"
#include "compc/ply_io.hpp"
#include "compc/sampling.hpp"

namespace fs = std::filesystem;
using namespace compc;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kBadInput = 2, kGuidanceFailure = 3, kPceFailure = 4, kInternal = 5 };

void add_pipeline_options(CLI::App& cmd, CompletionConfig& cfg) {
  auto& z = cfg.zfc;
  auto& p = cfg.pce;
  cmd.add_option("--resolution", cfg.resolution, "Output point count")->check(CLI::PositiveNumber);
  cmd.add_option("--seed", cfg.seed, "Seed for every random choice");
  cmd.add_option("--iterations", z.iterations, "Completion iterations")->check(CLI::PositiveNumber);
  cmd.add_option("--completion-count", z.completion_count, "Completion Gaussians (0: |P_in|)");
  cmd.add_option("--candidate-views", z.candidate_views, "Reference view candidates")->check(CLI::PositiveNumber);
  cmd.add_option("--render-size", z.render_size, "Training image size")->check(CLI::PositiveNumber);
  cmd.add_option("--sigma-n", z.sigma_n, "Noise of the completion initialisation")->check(CLI::NonNegativeNumber);
  cmd.add_option("--w1", z.w1, "Scale regulariser weight");
  cmd.add_option("--w2", z.w2, "Preservation weight");
  cmd.add_option("--lr-centers", z.lr_centers, "Centre learning rate");
  cmd.add_option("--checkpoint-every", z.checkpoint_every, "Checkpoint period in iterations (0: off)");
  cmd.add_option("--checkpoint-dir", z.checkpoint_dir, "Directory for checkpoints and failure dumps");
  cmd.add_option("--surface-views", p.views, "Views for surface extraction")->check(CLI::PositiveNumber);
  cmd.add_option("--sdf-iterations", p.pulling.iterations, "SDF fitting iterations")->check(CLI::PositiveNumber);
  cmd.add_option("--sdf-layers", p.pulling.shape.hidden_layers, "SDF hidden layers")->check(CLI::PositiveNumber);
  cmd.add_option("--sdf-width", p.pulling.shape.width, "SDF hidden width")->check(CLI::PositiveNumber);
  cmd.add_option("--sdf-skip", p.pulling.shape.skip_layer, "SDF skip layer");
  cmd.add_option("--sdf-batch", p.pulling.near_batch, "Near and far batch size")
      ->each([&p](const std::string& v) { p.pulling.far_batch = std::stoul(v); })
      ->check(CLI::PositiveNumber);
  cmd.add_option("--grid-resolution", p.grid_resolution, "Resampling grid vertices per axis")->check(CLI::Range(8, 1024));
}

ProviderFactory make_factory(bench::GuidanceMode mode, const PointCloud* gt) {
  if (mode == bench::GuidanceMode::kBridge) {
    const BridgeAddress addr = BridgeAddress::from_env();
    if (!healthcheck(addr)) throw TransportError("guidance bridge at " + addr.to_string() + " is not answering");
    return bridge_factory();
  }
  if (!gt) throw PreconditionError("oracle guidance needs --gt");
  return oracle_factory(*gt);
}

void print_row(const bench::ResultRow& row) {
  std::printf("CDx100 %.4f  EMDx100 %.4f  seconds %.1f\n", row.cd_x100, row.emd_x100, row.seconds);
}

// Runs fn and maps library errors onto exit codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return kOk;
  } catch (const TransportError& e) {
    spdlog::error("guidance: {}", e.what());
    return kGuidanceFailure;
  } catch (const GuidanceContractError& e) {
    spdlog::error("guidance: {}", e.what());
    return kGuidanceFailure;
  } catch (const ExtractionError& e) {
    spdlog::error("extraction: {}", e.what());
    return kPceFailure;
  } catch (const IoError& e) {
    spdlog::error("input: {}", e.what());
    return kBadInput;
  } catch (const PreconditionError& e) {
    spdlog::error("input: {}", e.what());
    return kBadInput;
  } catch (const DegenerateError& e) {
    spdlog::error("input: {}", e.what());
    return kBadInput;
  } catch (const PoseError& e) {
    spdlog::error("input: {}", e.what());
    return kBadInput;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kInternal;
  }
}

PointCloud load_cloud(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  PointCloud pc = io::read_point_cloud(path);
  if (pc.empty()) throw IoError(path.string() + ": no points");
  return pc;
}

// Files, or builtin:sphere, builtin:box, builtin:torus.
bench::TriangleMesh load_mesh(const fs::path& path) {
  const std::string s = path.string();
  if (s == "builtin:sphere") return bench::make_uv_sphere(0.5, 48, 96);
  if (s == "builtin:box") return bench::make_box({0.5, 0.35, 0.2});
  if (s == "builtin:torus") return bench::make_torus(0.35, 0.12, 96, 48);
  if (!fs::exists(path)) throw IoError("no such file: " + s);
  return bench::read_mesh(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time point cloud completion"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  // complete
  CompletionConfig ccfg;
  fs::path c_input, c_output, c_gt, c_mesh, c_image, c_checkpoint;
  std::string c_guidance = "oracle";
  auto* complete = app.add_subcommand("complete", "Complete a partial point cloud");
  complete->add_option("--input", c_input, "Partial cloud (.ply or .xyz)")->required();
  complete->add_option("--output", c_output, "Completed cloud (.ply or .xyz)");
  complete->add_option("--gt", c_gt, "Ground truth: oracle guidance source and evaluation target");
  complete->add_option("--guidance", c_guidance, "oracle or bridge")->check(CLI::IsMember({"oracle", "bridge"}));
  complete->add_option("--mesh", c_mesh, "Also write the zero level set as a mesh");
  complete->add_option("--reference-image", c_image, "Reference view render (PNG)");
  complete->add_option("--gaussians", c_checkpoint, "Final Gaussian state (PLY)");
  add_pipeline_options(*complete, ccfg);

  // synth
  fs::path s_mesh, s_output, s_gt;
  int s_level = 1;
  std::uint64_t s_seed = 0;
  std::size_t s_gt_points = 16384;
  bench::SynthConfig scfg;
  auto* synth = app.add_subcommand("synth", "Render a partial cloud from a mesh");
  synth->add_option("--mesh", s_mesh, "Mesh (.obj, .ply or builtin:<sphere|box|torus>)")->required();
  synth->add_option("--output", s_output, "Partial cloud")->required();
  synth->add_option("--level", s_level, "Merged views (1, 3 or 7)")->check(CLI::IsMember({1, 3, 7}));
  synth->add_option("--seed", s_seed);
  synth->add_option("--resolution", scfg.resolution, "Working resolution")->check(CLI::PositiveNumber);
  synth->add_option("--radius-factor", scfg.radius_factor, "Camera distance over bounding radius");
  synth->add_option("--gt-output", s_gt, "Also write uniform surface samples");
  synth->add_option("--gt-points", s_gt_points, "Surface sample count")->check(CLI::PositiveNumber);

  // noise
  fs::path n_input, n_output;
  double n_std = 0.0;
  std::uint64_t n_seed = 0;
  auto* noise = app.add_subcommand("noise", "Add Gaussian noise to a cloud");
  noise->add_option("--input", n_input)->required();
  noise->add_option("--output", n_output)->required();
  noise->add_option("--std", n_std, "Per-coordinate standard deviation")->required()->check(CLI::NonNegativeNumber);
  noise->add_option("--seed", n_seed);

  // eval
  fs::path e_pred, e_gt, e_csv;
  bench::EvalOptions eopt;
  auto* eval = app.add_subcommand("eval", "Chamfer and EMD of a prediction against ground truth");
  eval->add_option("--pred", e_pred)->required();
  eval->add_option("--gt", e_gt)->required();
  eval->add_option("--resolution", eopt.resolution)->check(CLI::PositiveNumber);
  eval->add_option("--seed", eopt.seed);
  eval->add_option("--csv", e_csv, "Write the result row as CSV");

  // mesh
  fs::path m_input, m_output;
  pce::GridPullingConfig mcfg;
  int m_grid = 128;
  auto* mesh = app.add_subcommand("mesh", "Fit an SDF to a cloud and extract its zero level set");
  mesh->add_option("--input", m_input)->required();
  mesh->add_option("--output", m_output, "Mesh (.obj or .ply)")->required();
  mesh->add_option("--iterations", mcfg.iterations)->check(CLI::PositiveNumber);
  mesh->add_option("--grid-resolution", m_grid)->check(CLI::Range(8, 1024));
  mesh->add_option("--seed", mcfg.seed);

  // bench
  bench::BenchmarkSpec spec;
  CompletionConfig bcfg;
  std::string b_guidance = "oracle";
  fs::path b_csv, b_outdir;
  std::size_t b_workers = 1;
  auto* benchcmd = app.add_subcommand("bench", "Synthesise, complete and score a set of meshes");
  benchcmd->add_option("--inputs", spec.inputs, "Meshes (.obj, .ply or builtin:<sphere|box|torus>)")->required();
  benchcmd->add_option("--level", spec.level)->check(CLI::IsMember({1, 3, 7}));
  benchcmd->add_option("--noise", spec.noise)->check(CLI::NonNegativeNumber);
  benchcmd->add_option("--repeats", spec.repeats)->check(CLI::PositiveNumber);
  benchcmd->add_option("--seeds", spec.seeds, "One per repeat");
  benchcmd->add_option("--guidance", b_guidance)->check(CLI::IsMember({"oracle", "bridge"}));
  benchcmd->add_option("--csv", b_csv, "Result rows");
  benchcmd->add_option("--out-dir", b_outdir, "Per-run completed clouds");
  benchcmd->add_option("--workers", b_workers, "Parallel jobs (0: all cores)");
  add_pipeline_options(*benchcmd, bcfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return kOk;
    // Validators reject missing files and out-of-range values: bad input.
    return dynamic_cast<const CLI::ValidationError*>(&e) ? kBadInput : kUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  if (*complete) {
    return guarded([&] {
      const PointCloud p_in = load_cloud(c_input);
      std::optional<PointCloud> gt;
      if (!c_gt.empty()) gt = load_cloud(c_gt);
      ccfg.build_mesh = !c_mesh.empty();
      const auto factory = make_factory(bench::parse_guidance_mode(c_guidance), gt ? &*gt : nullptr);
      const auto t0 = std::chrono::steady_clock::now();
      const CompletionResult res = complete_point_cloud(p_in, factory, ccfg);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!c_output.empty()) {
        if (c_output.extension() == ".xyz") io::write_xyz(c_output, res.p_out);
        else io::write_point_cloud(c_output, res.p_out);
        spdlog::info("wrote {} points to {}", res.p_out.size(), c_output.string());
      }
      if (res.mesh) bench::write_mesh(c_mesh, *res.mesh);
      if (!c_image.empty()) io::write_png(c_image, res.zfc.reference_image);
      if (!c_checkpoint.empty()) {
        const GaussianSet sets[] = {res.zfc.g_in, res.zfc.g_m};
        zfc::write_checkpoint(c_checkpoint, sets);
      }
      if (gt) {
        bench::EvalOptions opt;
        opt.resolution = ccfg.resolution;
        opt.seed = ccfg.seed;
        auto row = bench::evaluate(res.p_out, *gt, opt);
        row.seconds = secs;
        print_row(row);
      }
    });
  }

  if (*synth) {
    return guarded([&] {
      const auto m = load_mesh(s_mesh);
      const PointCloud pc = bench::synth_partial_from_mesh(m, s_level, s_seed, scfg);
      io::write_point_cloud(s_output, pc);
      spdlog::info("wrote {} points to {}", pc.size(), s_output.string());
      if (!s_gt.empty()) io::write_point_cloud(s_gt, bench::sample_mesh_surface(m, s_gt_points, s_seed));
    });
  }

  if (*noise) {
    return guarded([&] { io::write_point_cloud(n_output, bench::add_noise(load_cloud(n_input), n_std, n_seed)); });
  }

  if (*eval) {
    return guarded([&] {
      auto row = bench::evaluate(load_cloud(e_pred), load_cloud(e_gt), eopt);
      row.object = e_pred.stem().string();
      print_row(row);
      if (!e_csv.empty()) bench::write_csv(e_csv, std::span<const bench::ResultRow>(&row, 1));
    });
  }

  if (*mesh) {
    return guarded([&] {
      const PointCloud pc = load_cloud(m_input);
      auto [work, t] = normalize_unit_box(pc);
      const auto fit = pce::train_grid_pulling(work.points, work.points, mcfg);
      auto tri = pce::marching_cubes_mesh(fit.network, pce::GridConfig::around(work.points, m_grid));
      for (auto& v : tri.vertices) v = t.invert(v);
      bench::write_mesh(m_output, tri);
      spdlog::info("wrote {} vertices, {} faces to {}", tri.vertices.size(), tri.faces.size(), m_output.string());
    });
  }

  if (*benchcmd) {
    return guarded([&] {
      spec.resolution = bcfg.resolution;
      spec.guidance = bench::parse_guidance_mode(b_guidance);
      spec.validate();
      if (!b_outdir.empty()) fs::create_directories(b_outdir);
      const auto seeds = spec.run_seeds();
      const std::size_t runs = spec.inputs.size() * seeds.size();
      std::vector<bench::ResultRow> rows(runs);
      std::vector<PointCloud> outputs(runs), partials(spec.inputs.size()), gts(spec.inputs.size());
      std::mutex log_mutex;
      bench::run_pool(runs, b_workers, [&](std::size_t job) {
        const std::size_t obj = job / seeds.size();
        const std::uint64_t seed = seeds[job % seeds.size()];
        const auto& path = spec.inputs[obj];
        const auto mesh_in = load_mesh(path);
        bench::SynthConfig sc;
        // The partial input and ground truth depend on the object only; repeats differ in the completion seed.
        const PointCloud gt = bench::sample_mesh_surface(mesh_in, spec.resolution, 0);
        const PointCloud p_in = bench::add_noise(bench::synth_partial_from_mesh(mesh_in, spec.level, 0, sc), spec.noise, 0);
        CompletionConfig cfg = bcfg;
        cfg.seed = seed;
        const auto t0 = std::chrono::steady_clock::now();
        const auto res = complete_point_cloud(p_in, make_factory(spec.guidance, &gt), cfg);
        bench::EvalOptions opt{spec.resolution, seed};
        auto row = bench::evaluate(res.p_out, gt, opt);
        row.object = path.stem().string();
        if (row.object.starts_with("builtin:")) row.object = row.object.substr(8);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!b_outdir.empty())
          io::write_point_cloud(b_outdir / (row.object + "_seed" + std::to_string(seed) + ".ply"), res.p_out);
        {
          std::lock_guard lock(log_mutex);
          spdlog::info("{} seed {}: CDx100 {:.4f} EMDx100 {:.4f} ({:.1f} s)", row.object, seed, row.cd_x100,
                       row.emd_x100, row.seconds);
          if (job % seeds.size() == 0) {
            partials[obj] = p_in;
            gts[obj] = gt;
          }
        }
        rows[job] = std::move(row);
        outputs[job] = res.p_out;
      });
      if (seeds.size() >= 2) {
        for (std::size_t obj = 0; obj < spec.inputs.size(); ++obj) {
          const std::span<const PointCloud> group(outputs.data() + obj * seeds.size(), seeds.size());
          const auto mm = bench::multimodal_metrics(group, partials[obj], gts[obj]);
          for (std::size_t k = 0; k < seeds.size(); ++k) {
            auto& row = rows[obj * seeds.size() + k];
            row.tmd = mm.tmd, row.uhd = mm.uhd, row.mmd = mm.mmd;
          }
        }
      }
      if (!b_csv.empty()) bench::write_csv(b_csv, rows);
      bench::write_table(std::cout, rows);
    });
  }
  return kUsage;
}
