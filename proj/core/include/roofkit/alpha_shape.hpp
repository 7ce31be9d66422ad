#pragma once

#include <array>
#include <optional>
#include <vector>

#include "roofkit/geometry.hpp"
#include "roofkit/polygon.hpp"

namespace roofkit {

/// 2D alpha shape of a point set: the union of Delaunay triangles whose
/// circumradius is at most 1/alpha.
struct AlphaShape {
  std::vector<Ring> rings;  ///< boundary loops (outer rings and holes mixed; even-odd semantics)
  double area = 0.0;        ///< total area of the kept triangles
  std::size_t triangle_count = 0;
};

/// Drops z, deduplicates exact xy twins, and computes the alpha shape.
/// `alpha` empty selects 1 / (2 * median nearest-neighbor spacing).
/// Throws InvalidArgument for degenerate (collinear) clouds.
AlphaShape outline_2d(const PointCloud& cloud, std::optional<double> alpha = std::nullopt);

/// Median xy nearest-neighbor spacing, the scale behind the default alpha.
double median_nn_spacing_2d(const PointCloud& cloud);

}  // namespace roofkit
