#include "compc/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include "compc/error.hpp"

namespace compc {

namespace {

constexpr std::size_t kLeafSize = 12;

bool hit_less(const KdTree::Hit& a, const KdTree::Hit& b) {
  return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.index < b.index);
}

struct NearestVisitor {
  std::size_t exclude;
  KdTree::Hit best;
  double bound() const { return best.distance_sq; }
  void offer(std::size_t i, double d2) {
    if (i == exclude) return;
    KdTree::Hit h{i, d2};
    if (hit_less(h, best)) best = h;
  }
};

struct KnnVisitor {
  std::size_t exclude;
  std::size_t k;
  std::priority_queue<KdTree::Hit, std::vector<KdTree::Hit>, decltype(&hit_less)> heap{&hit_less};
  double bound() const {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().distance_sq;
  }
  void offer(std::size_t i, double d2) {
    if (i == exclude) return;
    KdTree::Hit h{i, d2};
    if (heap.size() < k) {
      heap.push(h);
    } else if (hit_less(h, heap.top())) {
      heap.pop();
      heap.push(h);
    }
  }
};

struct RadiusVisitor {
  double r2;
  std::vector<std::size_t> found;
  double bound() const { return r2; }
  void offer(std::size_t i, double d2) {
    if (d2 <= r2) found.push_back(i);
  }
};

}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (points_.size() >= kBruteForceThreshold) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back({});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as leaf

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                     const double ca = points_[a][axis], cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

template <typename Visitor>
void KdTree::visit(std::size_t node_id, const Vec3& q, Visitor& v) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      v.offer(idx, (points_[idx] - q).squaredNorm());
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::size_t first = diff < 0 ? node.left : node.right;
  const std::size_t second = diff < 0 ? node.right : node.left;
  visit(first, q, v);
  if (diff * diff <= v.bound()) visit(second, q, v);
}

KdTree::Hit KdTree::nearest(const Vec3& query, std::size_t exclude) const {
  require(!points_.empty(), "nearest query on empty KdTree");
  NearestVisitor v{exclude, {}};
  if (nodes_.empty()) {
    for (std::size_t i = 0; i < points_.size(); ++i) v.offer(i, (points_[i] - query).squaredNorm());
  } else {
    visit(0, query, v);
  }
  return v.best;
}

std::vector<KdTree::Hit> KdTree::knn(const Vec3& query, std::size_t k, std::size_t exclude) const {
  KnnVisitor v{exclude, k};
  if (k == 0) return {};
  if (nodes_.empty()) {
    for (std::size_t i = 0; i < points_.size(); ++i) v.offer(i, (points_[i] - query).squaredNorm());
  } else {
    visit(0, query, v);
  }
  std::vector<Hit> out;
  out.reserve(v.heap.size());
  while (!v.heap.empty()) {
    out.push_back(v.heap.top());
    v.heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> KdTree::within(const Vec3& query, double radius) const {
  RadiusVisitor v{radius * radius, {}};
  if (nodes_.empty()) {
    for (std::size_t i = 0; i < points_.size(); ++i) v.offer(i, (points_[i] - query).squaredNorm());
  } else {
    visit(0, query, v);
  }
  return std::move(v.found);
}

}  // namespace compc
