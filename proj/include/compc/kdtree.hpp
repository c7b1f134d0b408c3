#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "compc/point_cloud.hpp"

namespace compc {

// Static 3D k-d tree. Built once, then queried read-only (thread-safe).
// All queries break distance ties by the lower point index, so results are
// deterministic. Below kBruteForceThreshold points, queries scan linearly.
class KdTree {
 public:
  static constexpr std::size_t kBruteForceThreshold = 64;
  static constexpr std::size_t kNoExclude = std::numeric_limits<std::size_t>::max();

  struct Hit {
    std::size_t index = 0;
    double distance_sq = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }
  std::span<const Vec3> points() const { return points_; }

  Hit nearest(const Vec3& query, std::size_t exclude = kNoExclude) const;
  // Sorted by (distance, index).
  std::vector<Hit> knn(const Vec3& query, std::size_t k, std::size_t exclude = kNoExclude) const;
  // Indices within `radius` (inclusive), unsorted.
  std::vector<std::size_t> within(const Vec3& query, double radius) const;

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t begin = 0, end = 0;
    std::size_t left = 0, right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  template <typename Visitor>
  void visit(std::size_t node, const Vec3& q, Visitor& v) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace compc
