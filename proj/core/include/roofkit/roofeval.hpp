#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "roofkit/alpha_shape.hpp"
#include "roofkit/geometry.hpp"
#include "roofkit/planefit.hpp"

namespace roofkit {

/// Rasterized 2D footprint on the global grid of `resolution`-sized cells.
/// Cell (cx, cy) covers [cx*res, (cx+1)*res) x [cy*res, (cy+1)*res), so two
/// grids with the same resolution always share the snapping frame.
struct OccupancyGrid {
  double resolution = 0.1;
  std::int64_t min_cx = 0;
  std::int64_t min_cy = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> cells;  // row-major, 0/1
  std::size_t occupied = 0;

  bool at_global(std::int64_t cx, std::int64_t cy) const {
    if (cx < min_cx || cy < min_cy) return false;
    const std::uint64_t ix = static_cast<std::uint64_t>(cx - min_cx);
    const std::uint64_t iy = static_cast<std::uint64_t>(cy - min_cy);
    if (ix >= width || iy >= height) return false;
    return cells[iy * width + ix] != 0;
  }
};

/// Cells touched by the xy projection of the segment's member points.
OccupancyGrid footprint(const PlaneSegment& segment, const PointCloud& cloud, double resolution);

/// Cells whose centers fall inside the ring set (even-odd).
OccupancyGrid rasterize_rings(const std::vector<Ring>& rings, double resolution);

/// Intersection over union by cell counting; grids must share a resolution.
double grid_iou(const OccupancyGrid& a, const OccupancyGrid& b);

struct PlanePair {
  std::size_t gt = 0;
  std::size_t pred = 0;
  double iou = 0.0;
};

/// Outcome of the one-to-one plane matching rule.
struct PlaneMatchResult {
  std::vector<PlanePair> pairs;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Matches predicted planes to ground-truth planes: a prediction claims the
/// ground-truth plane of largest IoU, subject to the intersection covering at
/// least 40% of that plane's area; each ground-truth plane keeps only its
/// best claimant, the rest count as false positives.
PlaneMatchResult match_planes(const PointCloud& gt_cloud,
                              const std::vector<PlaneSegment>& gt_segments,
                              const PointCloud& pred_cloud,
                              const std::vector<PlaneSegment>& pred_segments, double resolution);

struct RoofScores {
  double completeness = 0.0;  // TP / (TP + FN)
  double correctness = 0.0;   // TP / (TP + FP)
  double quality = 0.0;       // TP / (TP + FP + FN)
};

/// Plane-level scores; throws InvalidArgument when a side has no planes at
/// all (the metric is undefined, never coerced to zero).
RoofScores roof_scores(const PlaneMatchResult& m);

/// Alpha-shape footprints of both clouds rasterized on a shared grid.
double outline_iou(const PointCloud& gt, const PointCloud& pred, std::optional<double> alpha,
                   double resolution);

/// Fixed-radius neighbor counts around every ground-truth point: within the
/// ground truth itself (self excluded) and within the prediction.
struct DensityProfile {
  double radius = 0.5;
  std::vector<std::uint32_t> counts_gt;
  std::vector<std::uint32_t> counts_pred;
  double mean_gt = 0.0;
  double var_gt = 0.0;  // population variance
  double mean_pred = 0.0;
  double var_pred = 0.0;
};

DensityProfile density_profile(const PointCloud& gt, const PointCloud& pred, double radius);

enum class PadPolicy {
  Auto,     ///< padded protocol iff the ground truth carries Pad labels
  WithPad,  ///< force the padded protocol (prediction stripped by height cut)
  NoPad,    ///< inputs are already unpadded
};

/// Where the ground-truth plane set comes from.
enum class GtPlanes {
  Segment,      ///< run segment_planes on the ground-truth cloud
  TruthLabels,  ///< use generator facet labels (requires the truth overload)
};

struct EvalConfig {
  SegmentationParams seg;
  double grid_resolution = 0.1;
  std::optional<double> alpha;  // empty = per-cloud auto (see outline_2d)
  double density_radius = 0.5;
  double heightcut_margin = 1.0;
  PadPolicy pad = PadPolicy::Auto;
  GtPlanes gt_planes = GtPlanes::Segment;
  bool emd_resample = true;  // equalize sizes for the assignment-distance columns
  std::uint64_t seed = 0;
};

/// Table-style metric record; a missing value means the metric was undefined
/// or its computation failed (see RoofReport::notes).
struct RoofMetrics {
  std::optional<double> emd_with_pad;
  std::optional<double> cd_with_pad;
  std::optional<double> emd;  // pad removed
  std::optional<double> cd;   // pad removed
  std::optional<double> outline_iou;
  std::optional<double> completeness;
  std::optional<double> correctness;
  std::optional<double> quality;
};

struct RoofReport {
  std::string sample;
  RoofMetrics metrics;
  PlaneMatchResult matches;
  DensityProfile density;
  std::size_t gt_planes = 0;
  std::size_t pred_planes = 0;
  std::vector<std::string> notes;  // per-field failures, never fatal
};

/// Runs the whole evaluation pipeline: pad handling, segmentation of both
/// clouds, plane matching and scores, outline IoU, density profile, plus the
/// point metrics with and without padding.
RoofReport evaluate_roof(const PointCloud& gt, const PointCloud& pred, const EvalConfig& cfg);

/// Same, with generator truth available for the ground-truth side
/// (cfg.gt_planes == TruthLabels uses facet labels as the plane set).
/// `gt` is the cloud handed to the pipeline, typically the padded training
/// target; its exact pad removal must reproduce truth.cloud.
RoofReport evaluate_roof(const struct GroundTruthRoof& truth, const PointCloud& gt,
                         const PointCloud& pred, const EvalConfig& cfg);

/// Convenience overload with gt = truth.cloud (unpadded protocol).
RoofReport evaluate_roof(const struct GroundTruthRoof& truth, const PointCloud& pred,
                         const EvalConfig& cfg);

}  // namespace roofkit
