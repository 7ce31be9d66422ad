#pragma once

#include <filesystem>
#include <string>

#include "roofkit/geometry.hpp"

namespace roofkit {

enum class CloudFormat { Xyz, PlyAscii };

/// Picks the format from the file extension (.xyz or .ply).
CloudFormat format_from_extension(const std::filesystem::path& path);

/// Loads a cloud, preserving point order. A trailing label column (XYZ) or a
/// `label` vertex property (PLY) populates labels. Malformed input raises
/// IoError naming the offending line.
PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format);

/// Writes a cloud so that loading it back reproduces every coordinate
/// bit-exactly (shortest round-trip decimal form) along with labels.
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      CloudFormat format);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

}  // namespace roofkit
