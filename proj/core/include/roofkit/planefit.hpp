#pragma once

#include <cstddef>
#include <vector>

#include "roofkit/geometry.hpp"

namespace roofkit {

/// Plane n.p + d = 0 with unit normal in canonical orientation
/// (normal.z >= 0; sign ties broken toward +x, then +y).
struct PlaneModel {
  Vec3 normal{0.0, 0.0, 1.0};
  double offset = 0.0;

  double signed_distance(const Point3& p) const { return dot(normal, p) + offset; }
  double distance(const Point3& p) const { return std::abs(signed_distance(p)); }
};

/// Flips the normal (and offset) into canonical orientation.
PlaneModel canonicalize(PlaneModel model);

/// A planar roof facet extracted from a cloud.
struct PlaneSegment {
  std::vector<std::size_t> indices;  // sorted, unique members
  PlaneModel model;                  // least-squares refit over members
  double rms = 0.0;                  // point-to-plane residual
};

struct SegmentationParams {
  std::size_t k_normals = 12;
  double angle_threshold = 10.0 * 0.017453292519943295;  // radians
  double distance_threshold = 0.15;                      // meters
  std::size_t min_points = 30;
};

/// Per-point normals: smallest-eigenvalue eigenvector of the k-nearest
/// neighborhood covariance (self included), flipped into canonical
/// orientation. Requires cloud size >= k >= 3.
std::vector<Vec3> estimate_normals(const PointCloud& cloud, std::size_t k);

/// Total-least-squares plane over the selected points. Requires >= 3
/// non-collinear points.
PlaneModel fit_plane(const PointCloud& cloud, const std::vector<std::size_t>& indices);

/// Curvature-seeded greedy region growing. Seeds are visited in ascending
/// order of local curvature; a neighbor joins when its normal stays within
/// angle_threshold of the seed normal and it lies within distance_threshold
/// of the region's refit plane (refit every 20 acceptances). Regions smaller
/// than min_points are discarded. Output is ordered by descending member
/// count, ties by lowest seed index.
std::vector<PlaneSegment> segment_planes(const PointCloud& cloud, const SegmentationParams& params);

}  // namespace roofkit
