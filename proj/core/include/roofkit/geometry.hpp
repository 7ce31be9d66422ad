#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace roofkit {

/// A 3D point (or displacement) in meters. Coordinates must stay finite.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Point3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Point3& operator+=(const Point3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Point3& o) const = default;
};

using Vec3 = Point3;

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double squared_norm(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(squared_norm(v)); }
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}
inline double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }
inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

/// Per-point tag distinguishing roof points from augmentation padding.
enum class Label : std::uint8_t { Roof = 0, Pad = 1 };

/// Ordered sequence of 3D points, optionally tagged per point.
/// Labels, when present, have the same length as points.
struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<Label>> labels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return labels.has_value(); }
};

/// Tight axis-aligned box; min <= max componentwise.
struct BoundingBox {
  Point3 min;
  Point3 max;

  Vec3 extent() const { return max - min; }
  Point3 center() const { return (min + max) * 0.5; }
  bool contains(const Point3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
  /// Grows each axis symmetrically by `frac` of its extent, with an absolute
  /// floor so zero-extent axes still open up.
  BoundingBox inflated(double frac, double floor_halfwidth = 0.0) const {
    BoundingBox b = *this;
    const Vec3 e = extent();
    const double hx = std::max(e.x * frac * 0.5, floor_halfwidth);
    const double hy = std::max(e.y * frac * 0.5, floor_halfwidth);
    const double hz = std::max(e.z * frac * 0.5, floor_halfwidth);
    b.min = b.min - Vec3{hx, hy, hz};
    b.max = b.max + Vec3{hx, hy, hz};
    return b;
  }
};

/// Tight bounding box of a non-empty cloud.
BoundingBox bounding_box(const PointCloud& cloud);

/// Throws InvalidCloud unless the cloud is non-empty, all points are finite,
/// and labels (if present) match the point count.
void validate_cloud(const PointCloud& cloud, const char* context);

}  // namespace roofkit
