#include "compc/normals.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "compc/error.hpp"
#include "compc/kdtree.hpp"

namespace compc {

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k) {
  require(k >= 2, "estimate_normals: k must be >= 2");
  require(cloud.size() >= k + 1, "estimate_normals: cloud needs at least k+1 points");

  const KdTree tree(cloud.points);
  Vec3 global_centroid = Vec3::Zero();
  for (const auto& p : cloud.points) global_centroid += p;
  global_centroid /= static_cast<double>(cloud.size());

  NormalEstimate out;
  out.cloud.points = cloud.points;
  out.cloud.normals.resize(cloud.size());

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto hits = tree.knn(p, k);
    Vec3 centroid = Vec3::Zero();
    for (const auto& h : hits) centroid += cloud.points[h.index];
    centroid /= static_cast<double>(hits.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& h : hits) {
      const Vec3 d = cloud.points[h.index] - centroid;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Vec3 lambda = eig.eigenvalues();  // ascending
    Vec3 n = eig.eigenvectors().col(0);

    const double spread = std::sqrt(std::max(lambda[2], 0.0) / static_cast<double>(hits.size()));
    if (lambda[2] <= 0.0 || lambda[1] <= 1e-12 * lambda[2]) {
      // Collinear (or coincident) neighbourhood: any direction orthogonal to the dominant axis.
      const Vec3 axis = lambda[2] > 0.0 ? Vec3(eig.eigenvectors().col(2)) : Vec3::UnitX();
      n = axis.unitOrthogonal();
      out.degenerate.push_back(i);
    }

    const double local = n.dot(p - centroid);
    const double tol = 1e-3 * std::max(spread, 1e-12);
    if (std::abs(local) > tol) {
      if (local < 0.0) n = -n;
    } else if (n.dot(p - global_centroid) < 0.0) {
      n = -n;
    }
    out.cloud.normals[i] = n.normalized();
  }
  return out;
}

}  // namespace compc
