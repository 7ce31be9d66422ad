#include "roofkit/geometry.hpp"

#include <algorithm>
#include <string>

#include "roofkit/errors.hpp"

namespace roofkit {

BoundingBox bounding_box(const PointCloud& cloud) {
  validate_cloud(cloud, "bounding_box");
  BoundingBox box{cloud.points.front(), cloud.points.front()};
  for (const Point3& p : cloud.points) {
    box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y), std::min(box.min.z, p.z)};
    box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y), std::max(box.max.z, p.z)};
  }
  return box;
}

void validate_cloud(const PointCloud& cloud, const char* context) {
  if (cloud.empty()) {
    throw InvalidCloud(std::string(context) + ": empty point cloud");
  }
  if (cloud.labels && cloud.labels->size() != cloud.points.size()) {
    throw InvalidCloud(std::string(context) + ": label count " +
                       std::to_string(cloud.labels->size()) + " != point count " +
                       std::to_string(cloud.points.size()));
  }
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!is_finite(cloud.points[i])) {
      throw InvalidCloud(std::string(context) + ": non-finite coordinate at point " +
                         std::to_string(i));
    }
  }
}

}  // namespace roofkit
