#include "compc/pce.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>

#include "compc/adam.hpp"
#include "compc/error.hpp"
#include "compc/kdtree.hpp"
#include "compc/metrics.hpp"
#include "compc/parallel.hpp"
#include "marching_cubes_tables.hpp"

namespace compc::pce {

namespace {

using Matrix = Eigen::MatrixXd;
using ConstMap = Eigen::Map<const Matrix>;
using MapMat = Eigen::Map<Matrix>;
const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix to_matrix(std::span<const Vec3> points, const Vec3& centre) {
  Matrix x(3, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = points[i] - centre;
  return x;
}

}  // namespace

SdfNetwork::SdfNetwork(const SdfShape& shape, const Vec3& centre, std::uint64_t seed)
    : shape_(shape), centre_(centre) {
  require(shape.hidden_layers >= 1 && shape.width >= 1, "SdfNetwork: need at least one hidden unit");
  require(shape.skip_layer < shape.hidden_layers, "SdfNetwork: skip layer out of range");
  std::size_t offset = 0;
  for (int l = 0; l <= shape.hidden_layers; ++l) {
    const int rows = l == shape.hidden_layers ? 1 : shape.width;
    const int cols = l == 0 ? 3 : input_width(l);
    layers_.push_back({offset, offset + static_cast<std::size_t>(rows) * cols, rows, cols});
    offset += static_cast<std::size_t>(rows) * (cols + 1);
  }
  params_.assign(offset, 0.0);

  std::mt19937_64 rng(seed);
  for (int l = 0; l <= shape.hidden_layers; ++l) {
    const Layer& ly = layers_[l];
    MapMat w(params_.data() + ly.w_offset, ly.rows, ly.cols);
    if (l == shape.hidden_layers) {
      // Geometric init: the output starts near |x| - init_radius.
      std::normal_distribution<double> n(std::sqrt(std::numbers::pi) / std::sqrt(ly.cols), 1e-5);
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = n(rng);
      params_[ly.b_offset] = -shape.init_radius;
    } else {
      std::normal_distribution<double> n(0.0, std::sqrt(2.0) / std::sqrt(ly.rows));
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = n(rng);
    }
  }
}

SdfNetwork::Weights SdfNetwork::unpack() const {
  // Owned copies keep Eigen's kernels on aligned storage, so results do not
  // depend on where the flat parameter vector happens to live.
  Weights wt;
  for (const Layer& ly : layers_) {
    wt.w.push_back(ConstMap(params_.data() + ly.w_offset, ly.rows, ly.cols));
    wt.b.push_back(Eigen::Map<const Eigen::VectorXd>(params_.data() + ly.b_offset, ly.rows));
  }
  return wt;
}

int SdfNetwork::input_width(int layer) const {
  if (layer == 0) return 3;
  return layer == shape_.skip_layer ? shape_.width + 3 : shape_.width;
}

void SdfNetwork::evaluate(std::span<const Vec3> points, std::span<double> values, std::span<Vec3> grads) const {
  require(values.size() == points.size(), "SdfNetwork::evaluate: output size mismatch");
  require(grads.empty() || grads.size() == points.size(), "SdfNetwork::evaluate: gradient size mismatch");
  const int L = shape_.hidden_layers;
  const Weights wt = unpack();
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < points.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, points.size() - start);
    const Matrix x = to_matrix(points.subspan(start, n), centre_);
    std::vector<Matrix> masks(static_cast<std::size_t>(L));
    Matrix a;
    for (int l = 0; l < L; ++l) {
      const Layer& ly = layers_[l];
      const Matrix& w = wt.w[l];
      const Eigen::VectorXd& b = wt.b[l];
      Matrix in;
      if (l == 0) {
        in = x;
      } else if (l == shape_.skip_layer) {
        in.resize(ly.cols, static_cast<Eigen::Index>(n));
        in << a, x;
        in *= kInvSqrt2;
      } else {
        in = std::move(a);
      }
      Matrix z = w * in;
      z.colwise() += b;
      if (!grads.empty()) masks[l] = (z.array() > 0.0).cast<double>().matrix();
      a = z.cwiseMax(0.0);
    }
    const Eigen::RowVectorXd wo = wt.w[L];
    const Eigen::RowVectorXd g = (wo * a).array() + wt.b[L][0];
    for (std::size_t i = 0; i < n; ++i) values[start + i] = g[static_cast<Eigen::Index>(i)];
    if (grads.empty()) continue;

    Matrix delta = wo.transpose().replicate(1, static_cast<Eigen::Index>(n));
    Matrix gx = Matrix::Zero(3, static_cast<Eigen::Index>(n));
    for (int l = L - 1; l >= 0; --l) {
      const Matrix d_in = wt.w[l].transpose() * delta.cwiseProduct(masks[l]);
      if (l == 0) {
        gx += d_in;
      } else if (l == shape_.skip_layer) {
        delta = d_in.topRows(shape_.width) * kInvSqrt2;
        gx += d_in.bottomRows(3) * kInvSqrt2;
      } else {
        delta = d_in;
      }
    }
    for (std::size_t i = 0; i < n; ++i) grads[start + i] = gx.col(static_cast<Eigen::Index>(i));
  }
}

SdfNetwork::Backward SdfNetwork::forward(std::span<const Vec3> points) {
  const int L = shape_.hidden_layers;
  const auto n = static_cast<Eigen::Index>(points.size());
  x_ = to_matrix(points, centre_);
  weights_ = unpack();
  inputs_.assign(static_cast<std::size_t>(L) + 1, Matrix());
  masks_.assign(static_cast<std::size_t>(L), Matrix());
  Matrix a;
  for (int l = 0; l < L; ++l) {
    const Layer& ly = layers_[l];
    const Matrix& w = weights_.w[l];
    const Eigen::VectorXd& b = weights_.b[l];
    Matrix& in = inputs_[l];
    if (l == 0) {
      in = x_;
    } else if (l == shape_.skip_layer) {
      in.resize(ly.cols, n);
      in << a, x_;
      in *= kInvSqrt2;
    } else {
      in = a;
    }
    Matrix z = w * in;
    z.colwise() += b;
    masks_[l] = (z.array() > 0.0).cast<double>().matrix();
    a = z.cwiseMax(0.0);
  }
  inputs_[L] = std::move(a);

  const Eigen::RowVectorXd wo = weights_.w[L];
  const Eigen::RowVectorXd g = (wo * inputs_[L]).array() + weights_.b[L][0];

  Backward res;
  res.values.assign(g.data(), g.data() + n);
  Matrix delta = wo.transpose().replicate(1, n);
  Matrix gx = Matrix::Zero(3, n);
  for (int l = L - 1; l >= 0; --l) {
    const Matrix d_in = weights_.w[l].transpose() * delta.cwiseProduct(masks_[l]);
    if (l == 0) {
      gx += d_in;
    } else if (l == shape_.skip_layer) {
      delta = d_in.topRows(shape_.width) * kInvSqrt2;
      gx += d_in.bottomRows(3) * kInvSqrt2;
    } else {
      delta = d_in;
    }
  }
  res.grads.resize(points.size());
  for (Eigen::Index i = 0; i < n; ++i) res.grads[static_cast<std::size_t>(i)] = gx.col(i);
  return res;
}

std::vector<double> SdfNetwork::backward(std::span<const double> d_value, std::span<const Vec3> d_grad) const {
  const int L = shape_.hidden_layers;
  const auto n = x_.cols();
  require(static_cast<Eigen::Index>(d_value.size()) == n && static_cast<Eigen::Index>(d_grad.size()) == n,
          "SdfNetwork::backward: batch size differs from forward()");
  const Eigen::RowVectorXd c = Eigen::Map<const Eigen::RowVectorXd>(d_value.data(), n);
  Matrix v(3, n);
  for (Eigen::Index i = 0; i < n; ++i) v.col(i) = d_grad[static_cast<std::size_t>(i)];

  // grad g is linear in the weights once the ReLU masks are fixed, so
  // d(v . grad g)/dW_l = gamma_l zeta_{l-1}^T, where zeta is the directional
  // derivative of the activations along v and gamma the usual backward signal.
  std::vector<Matrix> zeta_in(static_cast<std::size_t>(L) + 1);
  Matrix zeta;
  for (int l = 0; l < L; ++l) {
    const Layer& ly = layers_[l];
    const Matrix& w = weights_.w[l];
    Matrix& zin = zeta_in[l];
    if (l == 0) {
      zin = v;
    } else if (l == shape_.skip_layer) {
      zin.resize(ly.cols, n);
      zin << zeta, v;
      zin *= kInvSqrt2;
    } else {
      zin = zeta;
    }
    zeta = (w * zin).cwiseProduct(masks_[l]);
  }
  zeta_in[L] = std::move(zeta);

  std::vector<double> grad(params_.size(), 0.0);
  const Layer& out = layers_[L];
  const Eigen::RowVectorXd wo = weights_.w[L];
  const Eigen::VectorXd d_wo = inputs_[L] * c.transpose() + zeta_in[L].rowwise().sum();
  std::copy(d_wo.data(), d_wo.data() + out.cols, grad.begin() + static_cast<std::ptrdiff_t>(out.w_offset));
  grad[out.b_offset] = c.sum();

  Matrix delta = wo.transpose().replicate(1, n);
  for (int l = L - 1; l >= 0; --l) {
    const Layer& ly = layers_[l];
    const Matrix gamma = delta.cwiseProduct(masks_[l]);
    Matrix lhs = inputs_[l] * c.asDiagonal();
    lhs += zeta_in[l];
    const Matrix d_w = gamma * lhs.transpose();
    const Eigen::VectorXd d_b = gamma * c.transpose();
    std::copy(d_w.data(), d_w.data() + d_w.size(), grad.begin() + static_cast<std::ptrdiff_t>(ly.w_offset));
    std::copy(d_b.data(), d_b.data() + d_b.size(), grad.begin() + static_cast<std::ptrdiff_t>(ly.b_offset));
    if (l == 0) break;
    const Matrix d_in = weights_.w[l].transpose() * gamma;
    delta = l == shape_.skip_layer ? Matrix(d_in.topRows(shape_.width) * kInvSqrt2) : d_in;
  }
  return grad;
}

namespace {

constexpr char kBlobMagic[4] = {'C', 'S', 'D', 'F'};
constexpr std::uint32_t kBlobVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated SDF blob " + path.string());
  return v;
}

}  // namespace

void SdfNetwork::save(const std::filesystem::path& path) const {
  static_assert(std::endian::native == std::endian::little, "blob writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kBlobMagic, 4);
  put<std::uint32_t>(out, kBlobVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape_.hidden_layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape_.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape_.skip_layer));
  for (int k = 0; k < 3; ++k) put<float>(out, static_cast<float>(centre_[k]));
  put<std::uint64_t>(out, params_.size());
  for (double p : params_) put<float>(out, static_cast<float>(p));
  if (!out) throw IoError("failed writing " + path.string());
}

SdfNetwork SdfNetwork::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kBlobMagic, 4) != 0) throw IoError(path.string() + " is not an SDF blob");
  if (get<std::uint32_t>(in, path) != kBlobVersion) throw IoError("unsupported SDF blob version in " + path.string());
  SdfShape shape;
  shape.hidden_layers = static_cast<int>(get<std::uint32_t>(in, path));
  shape.width = static_cast<int>(get<std::uint32_t>(in, path));
  shape.skip_layer = static_cast<int>(get<std::uint32_t>(in, path));
  if (shape.hidden_layers < 1 || shape.width < 1 || shape.skip_layer >= shape.hidden_layers)
    throw IoError("bad layer sizes in " + path.string());
  Vec3 centre;
  for (int k = 0; k < 3; ++k) centre[k] = get<float>(in, path);
  SdfNetwork net(shape, centre, 0);
  if (get<std::uint64_t>(in, path) != net.params_.size()) throw IoError("parameter count mismatch in " + path.string());
  for (double& p : net.params_) p = get<float>(in, path);
  return net;
}

Vec3 pull_point(const Vec3& p, double g, const Vec3& grad) {
  const double n = grad.norm();
  if (n < 1e-8) return p;
  return p - g * grad / n;
}

std::vector<Vec3> pull(const ScalarField& field, std::span<const Vec3> points) {
  std::vector<double> g(points.size());
  std::vector<Vec3> grad(points.size());
  field.evaluate(points, g, grad);
  std::vector<Vec3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = pull_point(points[i], g[i], grad[i]);
  return out;
}

double pull_loss(const ScalarField& field, std::span<const Vec3> samples, std::span<const Vec3> target) {
  require(!samples.empty() && !target.empty(), "pull_loss: empty input");
  return chamfer_l1(pull(field, samples), target);
}

MergeState MergeState::with_sigma(double sigma, double w3) {
  require(sigma > 0.0, "MergeState: sigma must be positive");
  return {softplus_inverse(sigma), w3};
}

double MergeState::sigma() const { return softplus(raw); }

std::vector<Vec3> merge_layer(double sigma, std::span<const Vec3> pulled, std::span<const Vec3> p_in) {
  require(!p_in.empty(), "merge_layer: empty input cloud");
  require(sigma > 0.0, "merge_layer: sigma must be positive");
  const KdTree tree(p_in);
  std::vector<Vec3> out(pulled.size());
  for (std::size_t i = 0; i < pulled.size(); ++i) {
    const auto hit = tree.nearest(pulled[i]);
    const double e = std::exp(-std::sqrt(hit.distance_sq) / sigma);
    out[i] = e * p_in[hit.index] + (1.0 - e) * pulled[i];
  }
  return out;
}

namespace {

struct PulledBatch {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // grad g / |grad g|, zero where undefined
  std::vector<double> grad_norm;
};

PulledBatch pull_batch(std::span<const Vec3> samples, const SdfNetwork::Backward& fw) {
  PulledBatch b;
  b.points.resize(samples.size());
  b.normals.assign(samples.size(), Vec3::Zero());
  b.grad_norm.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double n = fw.grads[i].norm();
    b.grad_norm[i] = n;
    if (n < 1e-8) {
      b.points[i] = samples[i];
      continue;
    }
    b.normals[i] = fw.grads[i] / n;
    b.points[i] = samples[i] - fw.values[i] * b.normals[i];
  }
  return b;
}

}  // namespace

GridPullingLoss grid_pulling_loss(SdfNetwork& net, const MergeState& merge, std::span<const Vec3> near,
                                  std::span<const Vec3> far, std::span<const Vec3> p_surf, const KdTree& surf_tree,
                                  std::span<const Vec3> p_in, const KdTree& in_tree) {
  const std::size_t nb = near.size(), fb = far.size();
  require(nb >= 1 && fb >= 1, "grid_pulling_loss: empty batch");
  std::vector<Vec3> batch(near.begin(), near.end());
  batch.insert(batch.end(), far.begin(), far.end());
  const auto fw = net.forward(batch);
  const PulledBatch pb = pull_batch(batch, fw);
  const std::span<const Vec3> q_near(pb.points.data(), nb), q_far(pb.points.data() + nb, fb);

  const auto far_cd = chamfer_l1_with_grad(q_far, p_surf, surf_tree);
  const auto near_cd = chamfer_l1_with_grad(q_near, p_surf, surf_tree);

  const double sigma = merge.sigma();
  std::vector<Vec3> merged(nb);
  std::vector<double> e(nb), dist(nb);
  std::vector<std::size_t> idx(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const auto hit = in_tree.nearest(q_near[i]);
    idx[i] = hit.index;
    dist[i] = std::sqrt(hit.distance_sq);
    e[i] = std::exp(-dist[i] / sigma);
    merged[i] = e[i] * p_in[idx[i]] + (1.0 - e[i]) * q_near[i];
  }
  const auto mer = chamfer_l1_with_grad(merged, p_surf, surf_tree);

  GridPullingLoss out;
  out.far = far_cd.value;
  out.near = near_cd.value;
  out.merge = mer.value + merge.w3 * sigma;

  // Nearest-neighbour assignments are held fixed, as in the Chamfer gradient.
  std::vector<Vec3> d_q(nb + fb);
  double d_sigma = merge.w3;
  for (std::size_t i = 0; i < nb; ++i) {
    const Vec3& u = mer.d_a[i];
    Vec3 dq = near_cd.d_a[i] + (1.0 - e[i]) * u;
    if (dist[i] > 0.0) {
      const Vec3 r = q_near[i] - p_in[idx[i]];
      dq += (e[i] / (sigma * dist[i])) * r * r.dot(u);
      d_sigma -= u.dot(r) * e[i] * dist[i] / (sigma * sigma);
    }
    d_q[i] = dq;
  }
  for (std::size_t i = 0; i < fb; ++i) d_q[nb + i] = far_cd.d_a[i];

  std::vector<double> d_value(nb + fb, 0.0);
  std::vector<Vec3> d_grad(nb + fb, Vec3::Zero());
  for (std::size_t i = 0; i < nb + fb; ++i) {
    if (pb.grad_norm[i] < 1e-8) continue;
    const Vec3& n = pb.normals[i];
    const double un = d_q[i].dot(n);
    d_value[i] = -un;
    d_grad[i] = -fw.values[i] / pb.grad_norm[i] * (d_q[i] - un * n);
  }
  out.d_params = net.backward(d_value, d_grad);
  out.d_raw = d_sigma * sigmoid_d(merge.raw);
  return out;
}

GridPullingResult train_grid_pulling(std::span<const Vec3> p_surf, std::span<const Vec3> p_in,
                                     const GridPullingConfig& cfg, const GridPullingObserver& observer) {
  require(!p_surf.empty(), "train_grid_pulling: empty P_surf");
  require(!p_in.empty(), "train_grid_pulling: empty P_in");
  require(cfg.iterations >= 1 && cfg.near_batch >= 1 && cfg.far_batch >= 1, "train_grid_pulling: bad batch config");
  require(cfg.sigma0 >= 0.0 && cfg.sigma_init > 0.0 && cfg.w3 >= 0.0, "train_grid_pulling: bad noise or merge config");
  const Aabb box = Aabb::of(p_surf).padded(cfg.padding);

  GridPullingResult res;
  res.network = SdfNetwork(cfg.shape, box.center(), cfg.seed);
  res.merge = MergeState::with_sigma(cfg.sigma_init, cfg.w3);
  SdfNetwork& net = res.network;

  Adam adam(net.parameter_count(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
  Adam adam_sigma(1, {cfg.merge_learning_rate, 0.9, 0.999, 1e-8});
  const KdTree surf_tree(p_surf);
  const KdTree in_tree(p_in);
  std::vector<Vec3> near(cfg.near_batch), far(cfg.far_batch);

  for (int it = 0; it < cfg.iterations; ++it) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(it), 0x6770u};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, p_surf.size() - 1);
    std::normal_distribution<double> noise(0.0, cfg.sigma0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (auto& p : near) p = p_surf[pick(rng)] + Vec3(noise(rng), noise(rng), noise(rng));
    for (auto& p : far) p = box.min_corner + Vec3(u01(rng), u01(rng), u01(rng)).cwiseProduct(box.extent());

    const double sigma = res.merge.sigma();
    const auto loss = grid_pulling_loss(net, res.merge, near, far, p_surf, surf_tree, p_in, in_tree);
    if (!std::isfinite(loss.total()))
      throw Error(fmt::format("grid pulling diverged at iteration {}: far {} near {} merge {} sigma {}", it, loss.far,
                              loss.near, loss.merge, sigma));
    const GridPullingLog log{it, loss.far, loss.near, loss.merge, sigma};
    res.history.push_back(log);
    if (observer) observer(log);
    if (it % 500 == 0 || it + 1 == cfg.iterations)
      spdlog::debug("grid pulling {:5d}  far {:.5f}  near {:.5f}  merge {:.5f}  sigma {:.5f}", it, loss.far, loss.near,
                    loss.merge, sigma);

    adam.step(net.parameters(), loss.d_params);
    adam_sigma.step(std::span<double>(&res.merge.raw, 1), std::span<const double>(&loss.d_raw, 1));
  }
  return res;
}

GridConfig GridConfig::around(std::span<const Vec3> points, int resolution, double margin) {
  GridConfig g;
  g.resolution = resolution;
  g.bounds = Aabb::of(points).padded(margin);
  g.validate();
  return g;
}

void GridConfig::validate() const {
  require(resolution >= 8, "GridConfig: resolution must be >= 8");
  require((bounds.extent().array() > 0.0).all(), "GridConfig: bounds must have positive extent");
}

Vec3 GridConfig::cell_size() const { return bounds.extent() / static_cast<double>(resolution - 1); }

double GridConfig::cell_diagonal() const { return cell_size().norm(); }

Vec3 GridConfig::vertex(int i, int j, int k) const {
  return bounds.min_corner + cell_size().cwiseProduct(Vec3(i, j, k));
}

namespace {

// Field values on every grid vertex, index (k * res + j) * res + i.
std::vector<double> sample_grid(const ScalarField& field, const GridConfig& grid) {
  const int n = grid.resolution;
  const std::size_t slab = static_cast<std::size_t>(n) * n;
  std::vector<double> values(slab * n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    std::vector<Vec3> pts;
    pts.reserve(slab);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) pts.push_back(grid.vertex(i, j, static_cast<int>(k)));
    field.evaluate(pts, std::span<double>(values.data() + k * slab, slab), {});
  });
  return values;
}

}  // namespace

std::vector<Vec3> select_band(const ScalarField& field, const GridConfig& grid) {
  grid.validate();
  const auto values = sample_grid(field, grid);
  const double half_r = 0.5 * grid.cell_diagonal();
  const int n = grid.resolution;
  std::vector<Vec3> band;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (std::abs(values[(static_cast<std::size_t>(k) * n + j) * n + i]) < half_r) band.push_back(grid.vertex(i, j, k));
  return band;
}

PointCloud extract_uniform_points(const ScalarField& field, double sigma, std::span<const Vec3> p_in,
                                  const GridConfig& grid) {
  const auto band = select_band(field, grid);
  if (band.empty())
    throw ExtractionError("SDF level set missed grid; expand the grid bounds (currently " +
                          std::to_string(grid.bounds.extent().norm()) + " across)");
  PointCloud out;
  out.points = merge_layer(sigma, pull(field, band), p_in);
  return out;
}

PointCloud gaussian_surface_extraction(std::span<const GaussianSet> sets, std::size_t n_views,
                                       const CameraIntrinsics& intr, double delta) {
  std::vector<Vec3> centers;
  std::vector<double> radii;
  for (const auto& set : sets)
    for (std::size_t i = 0; i < set.size(); ++i)
      if (set.opacity(i, delta) > 0.5) {
        centers.push_back(set.centers[i]);
        radii.push_back(set.scale);
      }
  if (centers.empty()) throw ExtractionError("surface extraction: all Gaussians transparent");
  require(n_views >= 1, "surface extraction: need at least one view");

  const Orbit orbit = default_orbit(centers);
  const auto poses = fibonacci_sphere_poses(n_views, orbit.radius, orbit.target);
  std::vector<std::vector<std::size_t>> per_view(poses.size());
  parallel_for(poses.size(), [&](std::size_t v) { per_view[v] = frontmost_filter(centers, radii, poses[v], intr); });
  std::vector<char> keep(centers.size(), 0);
  for (const auto& ids : per_view)
    for (auto i : ids) keep[i] = 1;
  PointCloud out;
  for (std::size_t i = 0; i < centers.size(); ++i)
    if (keep[i]) out.points.push_back(centers[i]);
  return out;
}

TriangleMesh marching_cubes_mesh(const ScalarField& field, const GridConfig& grid) {
  grid.validate();
  const int n = grid.resolution;
  const auto values = sample_grid(field, grid);
  auto at = [&](int i, int j, int k) { return values[(static_cast<std::size_t>(k) * n + j) * n + i]; };
  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                       {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, int> edge_vertex;
  auto vertex_on_edge = [&](int i, int j, int k, int e) {
    const int* a = kCorner[kEdge[e][0]];
    const int* b = kCorner[kEdge[e][1]];
    int ia[3] = {i + a[0], j + a[1], k + a[2]}, ib[3] = {i + b[0], j + b[1], k + b[2]};
    if (std::lexicographical_compare(ib, ib + 3, ia, ia + 3)) std::swap(ia, ib);
    const int axis = ib[0] != ia[0] ? 0 : (ib[1] != ia[1] ? 1 : 2);
    const std::uint64_t key =
        ((static_cast<std::uint64_t>(ia[2]) * n + ia[1]) * n + ia[0]) * 3 + static_cast<std::uint64_t>(axis);
    if (auto it = edge_vertex.find(key); it != edge_vertex.end()) return it->second;
    const double va = at(ia[0], ia[1], ia[2]), vb = at(ib[0], ib[1], ib[2]);
    const double t = va == vb ? 0.5 : va / (va - vb);
    const Vec3 p = grid.vertex(ia[0], ia[1], ia[2]) + t * (grid.vertex(ib[0], ib[1], ib[2]) - grid.vertex(ia[0], ia[1], ia[2]));
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int k = 0; k + 1 < n; ++k)
    for (int j = 0; j + 1 < n; ++j)
      for (int i = 0; i + 1 < n; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c)
          if (at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < 0.0) cube |= 1 << c;
        if (cube == 0 || cube == 255) continue;
        const int* tri = detail::kTriTable[cube];
        for (int t = 0; tri[t] != -1; t += 3)
          mesh.faces.emplace_back(vertex_on_edge(i, j, k, tri[t]), vertex_on_edge(i, j, k, tri[t + 1]),
                                  vertex_on_edge(i, j, k, tri[t + 2]));
      }
  if (mesh.faces.empty()) {
    spdlog::warn("marching cubes: no isosurface inside the grid");
    return mesh;
  }

  std::vector<Vec3> centroids(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& fc = mesh.faces[f];
    centroids[f] = (mesh.vertices[fc[0]] + mesh.vertices[fc[1]] + mesh.vertices[fc[2]]) / 3.0;
  }
  std::vector<double> g(centroids.size());
  std::vector<Vec3> grad(centroids.size());
  field.evaluate(centroids, g, grad);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    auto& fc = mesh.faces[f];
    const Vec3 normal = (mesh.vertices[fc[1]] - mesh.vertices[fc[0]]).cross(mesh.vertices[fc[2]] - mesh.vertices[fc[0]]);
    if (normal.dot(grad[f]) < 0.0) std::swap(fc[1], fc[2]);
  }
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const int id = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(id < 0 ? static_cast<int>(mesh.vertices.size()) + id : id - 1);
      }
      if (idx.size() < 3) throw IoError(path.string() + ":" + std::to_string(lineno) + ": face with < 3 vertices");
      for (std::size_t t = 1; t + 1 < idx.size(); ++t) mesh.faces.emplace_back(idx[0], idx[t], idx[t + 1]);
    }
  }
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k)
      if (f[k] < 0 || f[k] >= static_cast<int>(mesh.vertices.size()))
        throw IoError(path.string() + ": face index out of range");
  return mesh;
}

PceResult run_pce(std::span<const GaussianSet> sets, std::span<const Vec3> p_in, const PceConfig& cfg,
                  const GridPullingObserver& observer) {
  PceResult res;
  res.p_surf = gaussian_surface_extraction(sets, cfg.views);
  spdlog::debug("surface extraction kept {} centres", res.p_surf.size());
  res.fit = train_grid_pulling(res.p_surf.points, p_in, cfg.pulling, observer);
  res.grid = GridConfig::around(res.p_surf.points, cfg.grid_resolution, cfg.grid_margin);
  res.p_out = extract_uniform_points(res.fit.network, res.fit.merge.sigma(), p_in, res.grid);
  return res;
}

}  // namespace compc::pce
