#include "roofkit/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "roofkit/errors.hpp"

namespace roofkit {

namespace {

constexpr std::uint32_t kLeafSize = 16;

struct HeapEntry {
  double sq = 0.0;
  std::size_t index = 0;
};

// "Worse" ordering: larger distance first, then larger index. The heap top is
// the entry that the next better candidate evicts.
inline bool worse(const HeapEntry& a, const HeapEntry& b) {
  if (a.sq != b.sq) return a.sq < b.sq;
  return a.index < b.index;
}

}  // namespace

SpatialIndex::SpatialIndex(const PointCloud& cloud) {
  validate_cloud(cloud, "build_index");
  points_ = cloud.points;
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  Point3 lo = points_[order_[begin]];
  Point3 hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    const Point3& p = points_[order_[i]];
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const Vec3 ext = hi - lo;
  int axis = 0;
  if (ext.y > ext.x) axis = 1;
  if (ext.z > (axis == 0 ? ext.x : ext.y)) axis = 2;

  const std::uint32_t mid = begin + (end - begin) / 2;
  auto coord = [axis](const Point3& p) { return axis == 0 ? p.x : (axis == 1 ? p.y : p.z); };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = coord(points_[a]);
                     const double cb = coord(points_[b]);
                     if (ca != cb) return ca < cb;
                     return a < b;
                   });

  node.axis = axis;
  node.split = coord(points_[order_[mid]]);
  const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(node);
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

template <typename Visit>
void SpatialIndex::walk(std::uint32_t node_id, const Point3& q, double& prune_sq,
                        const Visit& visit) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      visit(idx, squared_distance(q, points_[idx]));
    }
    return;
  }
  const double qc = node.axis == 0 ? q.x : (node.axis == 1 ? q.y : q.z);
  const double plane = qc - node.split;
  const std::uint32_t near = plane < 0.0 ? node.left : node.right;
  const std::uint32_t far = plane < 0.0 ? node.right : node.left;
  walk(near, q, prune_sq, visit);
  // Equal plane distance may still hide an equal-distance, lower-index point.
  if (plane * plane <= prune_sq) {
    walk(far, q, prune_sq, visit);
  }
}

std::vector<Neighbor> SpatialIndex::k_nearest(const Point3& query, std::size_t k) const {
  if (k == 0) return {};
  k = std::min(k, points_.size());
  std::vector<HeapEntry> heap;
  heap.reserve(k);
  double prune_sq = std::numeric_limits<double>::infinity();

  auto visit = [&](std::size_t idx, double sq) {
    const HeapEntry cand{sq, idx};
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), worse);
      if (heap.size() == k) prune_sq = heap.front().sq;
      return;
    }
    if (worse(heap.front(), cand)) return;  // front is already better or equal
    std::pop_heap(heap.begin(), heap.end(), worse);
    heap.back() = cand;
    std::push_heap(heap.begin(), heap.end(), worse);
    prune_sq = heap.front().sq;
  };

  walk(root_, query, prune_sq, visit);

  std::sort(heap.begin(), heap.end(), [](const HeapEntry& a, const HeapEntry& b) {
    if (a.sq != b.sq) return a.sq < b.sq;
    return a.index < b.index;
  });
  std::vector<Neighbor> out;
  out.reserve(heap.size());
  for (const HeapEntry& e : heap) out.push_back({e.index, std::sqrt(e.sq)});
  return out;
}

Neighbor SpatialIndex::nearest(const Point3& query) const {
  return k_nearest(query, 1).front();
}

std::vector<std::size_t> SpatialIndex::radius_search(const Point3& query, double radius) const {
  std::vector<std::size_t> out;
  double prune_sq = radius * radius;
  auto visit = [&](std::size_t idx, double sq) {
    if (sq <= prune_sq) out.push_back(idx);
  };
  walk(root_, query, prune_sq, visit);
  std::sort(out.begin(), out.end());
  return out;
}

SpatialIndex build_index(const PointCloud& cloud) { return SpatialIndex(cloud); }

}  // namespace roofkit
