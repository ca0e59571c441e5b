// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "pc3d/core.hpp"

namespace pc3d {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Ordering used for every nearest-neighbour answer: distance first, then the
/// lower point index.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  if (a.squared_distance != b.squared_distance) return a.squared_distance < b.squared_distance;
  return a.index < b.index;
}

/// Exact kd-tree over a fixed point set. Splits on the axis of largest spread
/// at the median; leaves hold up to kLeafSize points.
class SpatialIndex {
 public:
  static constexpr std::size_t kLeafSize = 8;

  SpatialIndex() = default;

  explicit SpatialIndex(std::span<const Point3> points) : points_(points.begin(), points.end()) {
    if (points_.empty()) throw Error(ErrorCode::EmptyCloud, "spatial index over no points");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, order_.size());
  }

  explicit SpatialIndex(const PointCloud& cloud) : SpatialIndex(std::span<const Point3>(cloud.points())) {}

  std::size_t size() const { return points_.size(); }
  const Point3& point(std::size_t i) const { return points_[i]; }

  Neighbor nearest(const Point3& q) const {
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    search_nearest(0, q, best);
    return best;
  }

  /// The k nearest points sorted by (distance, index); k is clamped to size().
  std::vector<Neighbor> knn(const Point3& q, std::size_t k) const {
    std::vector<Neighbor> heap;
    k = std::min(k, points_.size());
    if (k == 0) return heap;
    heap.reserve(k + 1);
    search_knn(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end(), neighbor_less);
    return heap;
  }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = 0;
    double split = 0.0;
    Aabb box;
  };

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    Aabb box{points_[order_[begin]], points_[order_[begin]]};
    for (std::size_t i = begin; i < end; ++i) {
      const Point3& p = points_[order_[i]];
      box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y), std::min(box.min.z, p.z)};
      box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y), std::max(box.max.z, p.z)};
    }
    Node node;
    node.begin = static_cast<std::uint32_t>(begin);
    node.end = static_cast<std::uint32_t>(end);
    node.box = box;
    if (end - begin > kLeafSize) {
      const Point3 ext = box.extent();
      int axis = 0;
      if (ext.y > ext[axis]) axis = 1;
      if (ext.z > ext[axis]) axis = 2;
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end),
                       [this, axis](std::size_t a, std::size_t b) {
                         const double va = points_[a][axis], vb = points_[b][axis];
                         return va != vb ? va < vb : a < b;
                       });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
    nodes_[static_cast<std::size_t>(id)] = node;
    return id;
  }

  static double box_distance2(const Aabb& b, const Point3& q) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double v = q[a];
      const double lo = b.min[a], hi = b.max[a];
      const double e = v < lo ? lo - v : (v > hi ? v - hi : 0.0);
      d += e * e;
    }
    return d;
  }

  void search_nearest(std::int32_t id, const Point3& q, Neighbor& best) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (box_distance2(n.box, q) > best.squared_distance) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const Neighbor cand{order_[i], squared_distance(points_[order_[i]], q)};
        if (neighbor_less(cand, best)) best = cand;
      }
      return;
    }
    const bool go_left = q[n.axis] < n.split;
    search_nearest(go_left ? n.left : n.right, q, best);
    search_nearest(go_left ? n.right : n.left, q, best);
  }

  void search_knn(std::int32_t id, const Point3& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (heap.size() == k && box_distance2(n.box, q) > heap.front().squared_distance) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const Neighbor cand{order_[i], squared_distance(points_[order_[i]], q)};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), neighbor_less);
        } else if (neighbor_less(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), neighbor_less);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), neighbor_less);
        }
      }
      return;
    }
    const bool go_left = q[n.axis] < n.split;
    search_knn(go_left ? n.left : n.right, q, k, heap);
    search_knn(go_left ? n.right : n.left, q, k, heap);
  }

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace pc3d
