#include "compc/bench.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "compc/error.hpp"
#include "compc/kdtree.hpp"
#include "compc/metrics.hpp"
#include "compc/parallel.hpp"
#include "compc/ply_io.hpp"
#include "compc/sampling.hpp"

namespace compc::bench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 face_normal(const TriangleMesh& mesh, const Eigen::Vector3i& f) {
  const Vec3& a = mesh.vertices[f[0]];
  return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
}

// Moller-Trumbore; returns t along dir or +inf.
double intersect(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-300) return kInf;
  const double inv = 1.0 / det;
  const Vec3 tv = origin - a;
  const double u = tv.dot(pv) * inv;
  if (u < 0.0 || u > 1.0) return kInf;
  const Vec3 qv = tv.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < 0.0 || u + v > 1.0) return kInf;
  const double t = e2.dot(qv) * inv;
  return t > 0.0 ? t : kInf;
}

Vec3 pixel_ray(const CameraFrame& frame, const CameraIntrinsics& intr, int row, int col) {
  const double f = intr.focal_px();
  const double x = (col + 0.5 - 0.5 * intr.width) / f;
  const double y = -(row + 0.5 - 0.5 * intr.height) / f;
  return frame.forward + x * frame.right + y * frame.up;
}

double bounding_radius(const TriangleMesh& mesh, const Vec3& centre) {
  double r = 0.0;
  for (const auto& v : mesh.vertices) r = std::max(r, (v - centre).norm());
  return r;
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << std::setprecision(10) << *v;
  return s.str();
}

}  // namespace

TriangleMesh make_uv_sphere(double radius, int stacks, int slices, const Vec3& centre) {
  require(radius > 0.0 && stacks >= 2 && slices >= 3, "make_uv_sphere: bad parameters");
  TriangleMesh m;
  m.vertices.push_back(centre + Vec3(0, 0, radius));
  for (int i = 1; i < stacks; ++i) {
    const double th = std::numbers::pi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double ph = 2.0 * std::numbers::pi * j / slices;
      m.vertices.push_back(centre + radius * Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)));
    }
  }
  m.vertices.push_back(centre + Vec3(0, 0, -radius));
  const int south = static_cast<int>(m.vertices.size()) - 1;
  auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
  for (int j = 0; j < slices; ++j) m.faces.emplace_back(0, ring(1, j), ring(1, j + 1));
  for (int i = 1; i + 1 < stacks; ++i)
    for (int j = 0; j < slices; ++j) {
      m.faces.emplace_back(ring(i, j), ring(i + 1, j), ring(i + 1, j + 1));
      m.faces.emplace_back(ring(i, j), ring(i + 1, j + 1), ring(i, j + 1));
    }
  for (int j = 0; j < slices; ++j) m.faces.emplace_back(south, ring(stacks - 1, j + 1), ring(stacks - 1, j));
  return m;
}

TriangleMesh make_box(const Vec3& h, const Vec3& centre) {
  require((h.array() > 0.0).all(), "make_box: half extents must be positive");
  TriangleMesh m;
  for (int k = 0; k < 8; ++k)
    m.vertices.push_back(centre + Vec3((k & 1) ? h.x() : -h.x(), (k & 2) ? h.y() : -h.y(), (k & 4) ? h.z() : -h.z()));
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.faces.emplace_back(q[0], q[1], q[2]);
    m.faces.emplace_back(q[0], q[2], q[3]);
  }
  return m;
}

TriangleMesh make_torus(double major, double minor, int rings, int sides, const Vec3& centre) {
  require(major > minor && minor > 0.0 && rings >= 3 && sides >= 3, "make_torus: bad parameters");
  TriangleMesh m;
  for (int i = 0; i < rings; ++i) {
    const double u = 2.0 * std::numbers::pi * i / rings;
    for (int j = 0; j < sides; ++j) {
      const double v = 2.0 * std::numbers::pi * j / sides;
      const double r = major + minor * std::cos(v);
      m.vertices.push_back(centre + Vec3(r * std::cos(u), r * std::sin(u), minor * std::sin(v)));
    }
  }
  auto id = [&](int i, int j) { return (i % rings) * sides + (j % sides); };
  for (int i = 0; i < rings; ++i)
    for (int j = 0; j < sides; ++j) {
      m.faces.emplace_back(id(i, j), id(i + 1, j), id(i + 1, j + 1));
      m.faces.emplace_back(id(i, j), id(i + 1, j + 1), id(i, j + 1));
    }
  return m;
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  if (path.extension() == ".obj") return pce::read_obj(path);
  const io::PlyData ply = io::read_ply(path);
  if (!ply.has("x") || !ply.has("y") || !ply.has("z")) throw IoError(path.string() + ": no vertex coordinates");
  TriangleMesh m;
  for (std::size_t i = 0; i < ply.vertex_count; ++i)
    m.vertices.emplace_back(ply.vertex.at("x")[i], ply.vertex.at("y")[i], ply.vertex.at("z")[i]);
  for (const auto& f : ply.faces) {
    if (f.size() < 3) throw IoError(path.string() + ": face with < 3 vertices");
    for (std::size_t t = 1; t + 1 < f.size(); ++t)
      m.faces.emplace_back(static_cast<int>(f[0]), static_cast<int>(f[t]), static_cast<int>(f[t + 1]));
  }
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k)
      if (f[k] < 0 || f[k] >= static_cast<int>(m.vertices.size())) throw IoError(path.string() + ": face index out of range");
  if (m.faces.empty()) throw IoError(path.string() + ": no faces");
  return m;
}

void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  if (path.extension() == ".obj") {
    pce::write_obj(path, mesh);
    return;
  }
  std::vector<io::PlyProperty> props{{"x", "float", {}}, {"y", "float", {}}, {"z", "float", {}}};
  for (const auto& v : mesh.vertices)
    for (int k = 0; k < 3; ++k) props[k].values.push_back(v[k]);
  std::vector<std::vector<std::uint32_t>> faces;
  for (const auto& f : mesh.faces)
    faces.push_back({static_cast<std::uint32_t>(f[0]), static_cast<std::uint32_t>(f[1]), static_cast<std::uint32_t>(f[2])});
  io::write_ply(path, props, {}, io::PlyFormat::kBinaryLittleEndian, faces);
}

double mesh_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (const auto& f : mesh.faces) a += 0.5 * face_normal(mesh, f).norm();
  return a;
}

Aabb mesh_bounds(const TriangleMesh& mesh) {
  require(!mesh.vertices.empty(), "mesh_bounds: empty mesh");
  return Aabb::of(mesh.vertices);
}

PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  require(!mesh.faces.empty(), "sample_mesh_surface: mesh has no faces");
  std::vector<double> cdf;
  cdf.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) cdf.push_back(total += face_normal(mesh, f).norm());
  require(total > 0.0, "sample_mesh_surface: zero surface area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = u(rng) * total;
    const std::size_t fi = std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin(), cdf.size() - 1);
    const auto& f = mesh.faces[fi];
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const Vec3& p0 = mesh.vertices[f[0]];
    out.points.push_back(p0 + a * (mesh.vertices[f[1]] - p0) + b * (mesh.vertices[f[2]] - p0));
    out.normals.push_back(face_normal(mesh, f).normalized());
  }
  return out;
}

bool DepthMap::empty() const {
  return std::none_of(face.begin(), face.end(), [](int f) { return f >= 0; });
}

std::vector<Vec3> DepthMap::back_project(const TriangleMesh& mesh) const {
  const CameraFrame frame = pose.frame();
  std::vector<Vec3> out;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const int f = face[static_cast<std::size_t>(r) * width + c];
      if (f < 0) continue;
      const Vec3 dir = pixel_ray(frame, intrinsics, r, c);
      const Vec3 n = face_normal(mesh, mesh.faces[f]);
      const Vec3& a = mesh.vertices[mesh.faces[f][0]];
      const double t = n.dot(a - frame.position) / n.dot(dir);
      out.push_back(frame.position + t * dir);
    }
  return out;
}

DepthMap render_depth(const TriangleMesh& mesh, const CameraPose& pose, const CameraIntrinsics& intr) {
  intr.validate();
  DepthMap dm;
  dm.width = intr.width;
  dm.height = intr.height;
  dm.pose = pose;
  dm.intrinsics = intr;
  const std::size_t npx = static_cast<std::size_t>(intr.width) * intr.height;
  dm.depth.assign(npx, kInf);
  dm.face.assign(npx, -1);
  const CameraFrame frame = pose.frame();
  const double f = intr.focal_px();

  // Pixel rows are independent, so faces are binned by the rows they cover.
  struct Rect {
    int c0, c1, r0, r1;
  };
  std::vector<Rect> rects(mesh.faces.size());
  std::vector<std::vector<int>> by_row(intr.height);
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    bool behind = false;
    for (int k = 0; k < 3; ++k) {
      const Vec3 c = frame.to_camera(mesh.vertices[mesh.faces[fi][k]]);
      if (c.z() <= intr.near) {
        behind = true;
        break;
      }
      const double px = 0.5 * intr.width + f * c.x() / c.z();
      const double py = 0.5 * intr.height - f * c.y() / c.z();
      x0 = std::min(x0, px), x1 = std::max(x1, px), y0 = std::min(y0, py), y1 = std::max(y1, py);
    }
    Rect r;
    if (behind) {
      r = {0, intr.width - 1, 0, intr.height - 1};
    } else {
      r = {std::max(0, static_cast<int>(std::floor(x0 - 0.5)) - 1), std::min(intr.width - 1, static_cast<int>(std::ceil(x1 - 0.5)) + 1),
           std::max(0, static_cast<int>(std::floor(y0 - 0.5)) - 1), std::min(intr.height - 1, static_cast<int>(std::ceil(y1 - 0.5)) + 1)};
    }
    rects[fi] = r;
    for (int row = r.r0; row <= r.r1; ++row) by_row[row].push_back(static_cast<int>(fi));
  }
  parallel_for(static_cast<std::size_t>(intr.height), [&](std::size_t row) {
    for (int fi : by_row[row]) {
      const auto& tri = mesh.faces[fi];
      const Vec3 &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]], &c = mesh.vertices[tri[2]];
      for (int col = rects[fi].c0; col <= rects[fi].c1; ++col) {
        const double t = intersect(frame.position, pixel_ray(frame, intr, static_cast<int>(row), col), a, b, c);
        const std::size_t px = row * intr.width + col;
        if (t < intr.near || t >= intr.far) continue;
        if (t < dm.depth[px] || (t == dm.depth[px] && fi < dm.face[px])) {
          dm.depth[px] = t;
          dm.face[px] = fi;
        }
      }
    }
  });
  return dm;
}

CameraPose synth_camera(const TriangleMesh& mesh, int i, const SynthConfig& cfg) {
  const Vec3 centre = mesh_bounds(mesh).center();
  const double r = bounding_radius(mesh, centre);
  require(r > 0.0, "synth_camera: degenerate mesh");
  CameraPose pose;
  pose.elevation_deg = cfg.elevation_deg;
  pose.azimuth_deg = cfg.first_azimuth_deg + cfg.azimuth_step_deg * i;
  pose.radius = cfg.radius_factor * r;
  pose.target = centre;
  return pose;
}

PointCloud synth_partial_from_mesh(const TriangleMesh& mesh, int level, std::uint64_t seed, const SynthConfig& cfg) {
  require(level == 1 || level == 3 || level == 7, "synth_partial_from_mesh: level must be 1, 3 or 7");
  require(!mesh.faces.empty(), "synth_partial_from_mesh: mesh has no faces");
  require(cfg.resolution >= 1, "synth_partial_from_mesh: resolution must be >= 1");
  CameraIntrinsics intr;
  intr.width = intr.height = cfg.depth_size;
  intr.fov_y_deg = cfg.fov_deg;

  std::vector<Vec3> merged;
  double footprint_sum = 0.0;
  std::size_t hits = 0;
  for (int i = 0; i < level; ++i) {
    const CameraPose pose = synth_camera(mesh, i, cfg);
    const DepthMap dm = render_depth(mesh, pose, intr);
    if (dm.empty())
      throw PoseError("synthesis camera " + std::to_string(i) + " (azimuth " + std::to_string(pose.azimuth_deg) +
                      ") sees no surface");
    const auto pts = dm.back_project(mesh);
    for (std::size_t k = 0; k < dm.depth.size(); ++k)
      if (dm.face[k] >= 0) {
        footprint_sum += dm.depth[k] / intr.focal_px();
        ++hits;
      }
    merged.insert(merged.end(), pts.begin(), pts.end());
  }

  // Greedy deduplication on a hash grid with cell = radius.
  const double radius = 0.5 * footprint_sum / static_cast<double>(hits);
  struct KeyHash {
    std::size_t operator()(const Eigen::Vector3i& k) const {
      return (static_cast<std::size_t>(k[0]) * 73856093u) ^ (static_cast<std::size_t>(k[1]) * 19349663u) ^
             (static_cast<std::size_t>(k[2]) * 83492791u);
    }
  };
  struct KeyEq {
    bool operator()(const Eigen::Vector3i& a, const Eigen::Vector3i& b) const { return a == b; }
  };
  std::unordered_map<Eigen::Vector3i, std::vector<std::size_t>, KeyHash, KeyEq> cells;
  std::vector<Vec3> kept;
  const double r2 = radius * radius;
  for (const auto& p : merged) {
    const Eigen::Vector3i key = (p / radius).array().floor().cast<int>();
    bool dup = false;
    for (int dx = -1; dx <= 1 && !dup; ++dx)
      for (int dy = -1; dy <= 1 && !dup; ++dy)
        for (int dz = -1; dz <= 1 && !dup; ++dz) {
          const auto it = cells.find(key + Eigen::Vector3i(dx, dy, dz));
          if (it == cells.end()) continue;
          for (std::size_t j : it->second)
            if ((kept[j] - p).squaredNorm() < r2) {
              dup = true;
              break;
            }
        }
    if (dup) continue;
    cells[key].push_back(kept.size());
    kept.push_back(p);
  }
  spdlog::debug("synth: level {} merged {} points, {} after dedup (radius {:.3g})", level, merged.size(), kept.size(),
                radius);
  if (kept.size() > cfg.resolution) kept = farthest_point_sample(kept, cfg.resolution, seed);
  return PointCloud(std::move(kept));
}

PointCloud add_noise(const PointCloud& cloud, double stddev, std::uint64_t seed) {
  require(stddev >= 0.0 && std::isfinite(stddev), "add_noise: std must be >= 0");
  PointCloud out = cloud;
  if (stddev == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& p : out.points)
    for (int k = 0; k < 3; ++k) p[k] += n(rng);
  out.normals.clear();
  return out;
}

ResultRow evaluate(const PointCloud& pred, const PointCloud& gt, const EvalOptions& options) {
  require(!pred.empty() && !gt.empty(), "evaluate: both clouds must be non-empty");
  require(options.resolution >= 1, "evaluate: resolution must be >= 1");
  auto resample = [&](const std::vector<Vec3>& pts) {
    return pts.size() > options.resolution ? farthest_point_sample(pts, options.resolution, options.seed) : pts;
  };
  const auto a = resample(pred.points);
  const auto b = resample(gt.points);
  ResultRow row;
  row.seed = options.seed;
  row.cd_x100 = 100.0 * chamfer_l1(a, b);
  EmdOptions emd;
  emd.seed = options.seed;
  emd.sample_size = std::min<std::size_t>(emd.sample_size, options.resolution);
  row.emd_x100 = 100.0 * emd_approx(a, b, emd);
  return row;
}

MultimodalMetrics multimodal_metrics(std::span<const PointCloud> completions, const PointCloud& p_in,
                                     const PointCloud& gt) {
  require(completions.size() >= 2, "multimodal_metrics: need at least two completions");
  require(!p_in.empty() && !gt.empty(), "multimodal_metrics: empty input or ground truth");
  MultimodalMetrics m;
  double pair_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < completions.size(); ++i)
    for (std::size_t j = i + 1; j < completions.size(); ++j, ++pairs)
      pair_sum += chamfer_l1(completions[i], completions[j]);
  m.tmd = 100.0 * pair_sum / static_cast<double>(pairs);
  double uhd_sum = 0.0;
  m.mmd = kInf;
  for (const auto& c : completions) {
    const auto d = directed_distances(p_in.points, std::span<const Vec3>(c.points));
    uhd_sum += *std::max_element(d.begin(), d.end());
    m.mmd = std::min(m.mmd, chamfer_l1(c, gt));
  }
  m.uhd = 100.0 * uhd_sum / static_cast<double>(completions.size());
  m.mmd *= 100.0;
  return m;
}

GuidanceMode parse_guidance_mode(const std::string& text) {
  if (text == "oracle") return GuidanceMode::kOracle;
  if (text == "bridge") return GuidanceMode::kBridge;
  throw PreconditionError("unknown guidance mode '" + text + "' (expected oracle or bridge)");
}

void BenchmarkSpec::validate() const {
  require(level == 1 || level == 3 || level == 7, "benchmark: level must be 1, 3 or 7");
  require(noise >= 0.0, "benchmark: noise std must be >= 0");
  require(resolution >= 1, "benchmark: resolution must be >= 1");
  require(repeats >= 1, "benchmark: repeats must be >= 1");
  require(seeds.empty() || seeds.size() == static_cast<std::size_t>(repeats),
          "benchmark: give one seed per repeat or none");
}

std::vector<std::uint64_t> BenchmarkSpec::run_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> s(static_cast<std::size_t>(repeats));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
  return s;
}

void write_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << kCsvHeader << '\n' << std::setprecision(10);
  for (const auto& r : rows)
    out << r.object << ',' << r.seed << ',' << r.cd_x100 << ',' << r.emd_x100 << ',' << format_optional(r.tmd) << ','
        << format_optional(r.uhd) << ',' << format_optional(r.mmd) << ',' << r.seconds << '\n';
}

void write_csv(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_csv(out, rows);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ResultRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError(path.string() + ": unexpected CSV header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (line.back() == ',') cols.emplace_back();
    if (cols.size() != 8) throw IoError(path.string() + ": expected 8 columns in '" + line + "'");
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    ResultRow r;
    r.object = cols[0];
    r.seed = std::stoull(cols[1]);
    r.cd_x100 = std::stod(cols[2]);
    r.emd_x100 = std::stod(cols[3]);
    r.tmd = opt(cols[4]);
    r.uhd = opt(cols[5]);
    r.mmd = opt(cols[6]);
    r.seconds = std::stod(cols[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_table(std::ostream& out, std::span<const ResultRow> rows) {
  std::size_t name_w = 6;
  for (const auto& r : rows) name_w = std::max(name_w, r.object.size());
  auto num = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) s << std::fixed << std::setprecision(3) << *v;
    else s << "-";
    return s.str();
  };
  auto line = [&](const std::string& name, const std::string& seed, double cd, double emd, const std::optional<double>& tmd,
                  const std::optional<double>& uhd, const std::optional<double>& mmd, double secs) {
    out << std::left << std::setw(static_cast<int>(name_w)) << name << "  " << std::right << std::setw(6) << seed
        << std::setw(10) << num(cd) << std::setw(10) << num(emd) << std::setw(9) << num(tmd) << std::setw(9) << num(uhd)
        << std::setw(9) << num(mmd) << std::setw(10) << num(secs) << '\n';
  };
  out << std::left << std::setw(static_cast<int>(name_w)) << "object" << "  " << std::right << std::setw(6) << "seed"
      << std::setw(10) << "CDx100" << std::setw(10) << "EMDx100" << std::setw(9) << "TMD" << std::setw(9) << "UHD"
      << std::setw(9) << "MMD" << std::setw(10) << "seconds" << '\n';
  if (rows.empty()) return;
  double cd = 0, emd = 0, secs = 0;
  for (const auto& r : rows) {
    line(r.object, std::to_string(r.seed), r.cd_x100, r.emd_x100, r.tmd, r.uhd, r.mmd, r.seconds);
    cd += r.cd_x100, emd += r.emd_x100, secs += r.seconds;
  }
  const double n = static_cast<double>(rows.size());
  line("mean", "", cd / n, emd / n, std::nullopt, std::nullopt, std::nullopt, secs / n);
}

void run_pool(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace compc::bench
