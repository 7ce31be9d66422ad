#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "roofkit/geometry.hpp"
#include "roofkit/planefit.hpp"
#include "roofkit/polygon.hpp"

namespace roofkit {

enum class RoofKind { Flat, Gable, Hip, LComposite };

RoofKind roof_kind_from_string(const std::string& name);
std::string to_string(RoofKind kind);

/// Declarative description of one synthetic roof sample.
struct RoofSpec {
  RoofKind kind = RoofKind::Gable;
  double width = 12.0;       // x extent of the footprint, meters
  double depth = 8.0;        // y extent, meters
  double pitch_deg = 20.0;   // facet slope from horizontal (ignored for Flat)
  double base_height = 5.0;  // eave height, meters
  double density = 4.0;      // points per square meter of facet surface
  double noise_sigma = 0.0;  // gaussian z-noise, meters
  std::uint64_t seed = 0;
  std::size_t max_points = 3200;  // cap keeping targets near the 3000-point operating size
};

/// A generated roof with its full truth: per-point facet ids, the true plane
/// of every facet, and the footprint outline.
struct GroundTruthRoof {
  std::string id;  // set by batch generation; empty otherwise
  PointCloud cloud;
  std::vector<int> facet_labels;
  std::vector<PlaneModel> facet_models;
  Ring outline;
};

struct PadConfig {
  double ring_width = 1.0;            // meters beyond the outline
  double margin = 1.0;                // pad sits this far below the median roof height
  std::optional<double> density;      // points/m^2; empty = match the roof's footprint density
};

enum class PadRemoval { Labels, HeightCut };

/// Stratified-jittered sampling of each analytic facet at the requested
/// density, with gaussian z-noise. Deterministic per seed.
GroundTruthRoof generate_roof(const RoofSpec& spec);

/// Appends a ring of pad points around the outline. The ring is the
/// Chebyshev dilation band [outline, outline + ring_width]; pad height is
/// exactly median(roof z) - margin. Output is roof points (Label::Roof, in
/// the original order) followed by pad points (Label::Pad).
PointCloud add_padding(const PointCloud& roof, const Ring& outline, const PadConfig& cfg,
                       std::uint64_t seed);

/// Labels mode drops Pad-tagged points exactly. HeightCut drops points with
/// z < median(z) - margin/2, the threshold rule used for unlabeled
/// predictions.
PointCloud remove_padding(const PointCloud& cloud, PadRemoval mode, double margin = 1.0);

/// Equalizes the cloud to n points: subsample without replacement when
/// shrinking, duplicate random points with a +-1e-6 m jitter when growing.
PointCloud resample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

double median_z(const PointCloud& cloud);

/// Batch spec files: one roof per line of `key=value` tokens, # comments.
std::vector<RoofSpec> parse_roof_specs(const std::filesystem::path& path);

/// Sample persistence: labeled PLY next to a JSON sidecar holding facet
/// truth and the outline.
void save_ground_truth(const GroundTruthRoof& roof, const std::filesystem::path& ply_path,
                       const std::filesystem::path& sidecar_path);
GroundTruthRoof load_ground_truth(const std::filesystem::path& ply_path,
                                  const std::filesystem::path& sidecar_path);

}  // namespace roofkit
