#pragma once

#include <cstddef>
#include <vector>

namespace roofkit {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

using Ring = std::vector<Vec2>;

/// Unsigned shoelace area of a closed ring (last vertex implicitly joins the
/// first).
double ring_area(const Ring& ring);

/// Even-odd point-in-polygon test over one ring.
bool point_in_ring(const Ring& ring, Vec2 p);

/// Even-odd test over a set of rings (holes come out naturally).
bool point_in_rings(const std::vector<Ring>& rings, Vec2 p);

/// Chebyshev (L-infinity) distance from a point to the ring boundary.
/// Dilating a polygon by w under this metric squares off the corners, which
/// keeps ring areas exactly (outer - inner) for axis-aligned outlines.
double chebyshev_distance_to_ring(const Ring& ring, Vec2 p);

struct Bounds2 {
  Vec2 min;
  Vec2 max;
};

Bounds2 ring_bounds(const Ring& ring);

}  // namespace roofkit
