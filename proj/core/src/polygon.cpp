#include "roofkit/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roofkit {

double ring_area(const Ring& ring) {
  double twice = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) * 0.5;
}

bool point_in_ring(const Ring& ring, Vec2 p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[(i + 1) % n];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xt = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < xt) inside = !inside;
    }
  }
  return inside;
}

bool point_in_rings(const std::vector<Ring>& rings, Vec2 p) {
  bool inside = false;
  for (const Ring& ring : rings) {
    if (point_in_ring(ring, p)) inside = !inside;
  }
  return inside;
}

namespace {

double chebyshev_to_segment(Vec2 a, Vec2 b, Vec2 p) {
  // max(|dx(t)|, |dy(t)|) is piecewise linear in t; its minimum over [0,1]
  // sits at an endpoint, a zero of dx or dy, or a crossing |dx| = |dy|.
  const double ex = b.x - a.x;
  const double ey = b.y - a.y;
  const double cx = a.x - p.x;
  const double cy = a.y - p.y;

  double candidates[8];
  std::size_t count = 0;
  candidates[count++] = 0.0;
  candidates[count++] = 1.0;
  if (ex != 0.0) candidates[count++] = -cx / ex;
  if (ey != 0.0) candidates[count++] = -cy / ey;
  // dx = dy and dx = -dy crossings
  if (ex != ey) candidates[count++] = (cy - cx) / (ex - ey);
  if (ex != -ey) candidates[count++] = -(cx + cy) / (ex + ey);

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    const double t = std::clamp(candidates[i], 0.0, 1.0);
    const double dx = cx + t * ex;
    const double dy = cy + t * ey;
    best = std::min(best, std::max(std::abs(dx), std::abs(dy)));
  }
  return best;
}

}  // namespace

double chebyshev_distance_to_ring(const Ring& ring, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, chebyshev_to_segment(ring[i], ring[(i + 1) % n], p));
  }
  return best;
}

Bounds2 ring_bounds(const Ring& ring) {
  Bounds2 b{ring.front(), ring.front()};
  for (const Vec2& v : ring) {
    b.min.x = std::min(b.min.x, v.x);
    b.min.y = std::min(b.min.y, v.y);
    b.max.x = std::max(b.max.x, v.x);
    b.max.y = std::max(b.max.y, v.y);
  }
  return b;
}

}  // namespace roofkit
