#pragma once

#include <cstddef>
#include <vector>

#include "roofkit/geometry.hpp"

namespace roofkit {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// kd-tree over a fixed cloud. Queries answer exactly as exhaustive search
/// would, with distance ties broken by lowest point index. Construction
/// copies the points; queries are const and safe to run concurrently.
class SpatialIndex {
 public:
  explicit SpatialIndex(const PointCloud& cloud);

  std::size_t size() const { return points_.size(); }

  Neighbor nearest(const Point3& query) const;

  /// The k closest points, sorted by (distance, index) ascending.
  /// Returns all points when k >= size.
  std::vector<Neighbor> k_nearest(const Point3& query, std::size_t k) const;

  /// Indices of all points with distance(query, p) <= radius, ascending.
  std::vector<std::size_t> radius_search(const Point3& query, double radius) const;

 private:
  struct Node {
    int axis = -1;            // -1 marks a leaf
    double split = 0.0;
    std::uint32_t left = 0;   // child node ids, leaves use [begin, end)
    std::uint32_t right = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  template <typename Visit>
  void walk(std::uint32_t node, const Point3& q, double& prune_sq, const Visit& visit) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;  // point ids, permuted by the build
  std::vector<Node> nodes_;
  std::uint32_t root_ = 0;
};

/// Builds an index over a non-empty cloud. Thin wrapper kept for symmetry
/// with the free-function style of the rest of the module.
SpatialIndex build_index(const PointCloud& cloud);

}  // namespace roofkit
