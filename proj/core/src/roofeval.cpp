#include "roofkit/roofeval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "roofkit/dataset.hpp"
#include "roofkit/errors.hpp"
#include "roofkit/metrics.hpp"
#include "roofkit/parallel.hpp"
#include "roofkit/rng.hpp"
#include "roofkit/spatial_index.hpp"

namespace roofkit {

namespace {

std::int64_t cell_of(double coord, double resolution) {
  return static_cast<std::int64_t>(std::floor(coord / resolution));
}

OccupancyGrid grid_from_cells(std::set<std::pair<std::int64_t, std::int64_t>>& occupied,
                              double resolution) {
  OccupancyGrid grid;
  grid.resolution = resolution;
  if (occupied.empty()) return grid;
  std::int64_t min_cx = std::numeric_limits<std::int64_t>::max();
  std::int64_t min_cy = min_cx;
  std::int64_t max_cx = std::numeric_limits<std::int64_t>::min();
  std::int64_t max_cy = max_cx;
  for (const auto& [cx, cy] : occupied) {
    min_cx = std::min(min_cx, cx);
    min_cy = std::min(min_cy, cy);
    max_cx = std::max(max_cx, cx);
    max_cy = std::max(max_cy, cy);
  }
  grid.min_cx = min_cx;
  grid.min_cy = min_cy;
  grid.width = static_cast<std::size_t>(max_cx - min_cx + 1);
  grid.height = static_cast<std::size_t>(max_cy - min_cy + 1);
  grid.cells.assign(grid.width * grid.height, 0);
  for (const auto& [cx, cy] : occupied) {
    grid.cells[static_cast<std::size_t>(cy - min_cy) * grid.width +
               static_cast<std::size_t>(cx - min_cx)] = 1;
  }
  grid.occupied = occupied.size();
  return grid;
}

std::size_t intersection_cells(const OccupancyGrid& a, const OccupancyGrid& b) {
  // Iterate the smaller grid.
  const OccupancyGrid& s = a.occupied <= b.occupied ? a : b;
  const OccupancyGrid& t = a.occupied <= b.occupied ? b : a;
  std::size_t count = 0;
  for (std::size_t iy = 0; iy < s.height; ++iy) {
    for (std::size_t ix = 0; ix < s.width; ++ix) {
      if (!s.cells[iy * s.width + ix]) continue;
      if (t.at_global(s.min_cx + static_cast<std::int64_t>(ix),
                      s.min_cy + static_cast<std::int64_t>(iy))) {
        ++count;
      }
    }
  }
  return count;
}

}  // namespace

OccupancyGrid footprint(const PlaneSegment& segment, const PointCloud& cloud, double resolution) {
  validate_cloud(cloud, "footprint");
  if (!(resolution > 0.0)) throw InvalidArgument("footprint: resolution must be positive");
  if (segment.indices.empty()) throw InvalidArgument("footprint: empty segment");
  std::set<std::pair<std::int64_t, std::int64_t>> occupied;
  for (std::size_t i : segment.indices) {
    if (i >= cloud.size()) throw InvalidArgument("footprint: segment index out of range");
    const Point3& p = cloud.points[i];
    occupied.emplace(cell_of(p.x, resolution), cell_of(p.y, resolution));
  }
  return grid_from_cells(occupied, resolution);
}

OccupancyGrid rasterize_rings(const std::vector<Ring>& rings, double resolution) {
  if (!(resolution > 0.0)) throw InvalidArgument("rasterize_rings: resolution must be positive");
  std::set<std::pair<std::int64_t, std::int64_t>> occupied;
  if (rings.empty()) {
    OccupancyGrid grid;
    grid.resolution = resolution;
    return grid;
  }
  Bounds2 bb = ring_bounds(rings.front());
  for (const Ring& ring : rings) {
    const Bounds2 rb = ring_bounds(ring);
    bb.min.x = std::min(bb.min.x, rb.min.x);
    bb.min.y = std::min(bb.min.y, rb.min.y);
    bb.max.x = std::max(bb.max.x, rb.max.x);
    bb.max.y = std::max(bb.max.y, rb.max.y);
  }
  const std::int64_t cy0 = cell_of(bb.min.y, resolution);
  const std::int64_t cy1 = cell_of(bb.max.y, resolution);
  std::vector<double> crossings;
  for (std::int64_t cy = cy0; cy <= cy1; ++cy) {
    const double y = (static_cast<double>(cy) + 0.5) * resolution;
    crossings.clear();
    for (const Ring& ring : rings) {
      const std::size_t n = ring.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = ring[i];
        const Vec2& b = ring[(i + 1) % n];
        if ((a.y > y) != (b.y > y)) {
          crossings.push_back(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
        }
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
      // Cells whose center x lies in [x0, x1).
      const std::int64_t ix0 =
          static_cast<std::int64_t>(std::ceil(crossings[i] / resolution - 0.5));
      const std::int64_t ix1 =
          static_cast<std::int64_t>(std::ceil(crossings[i + 1] / resolution - 0.5)) - 1;
      for (std::int64_t ix = ix0; ix <= ix1; ++ix) occupied.emplace(ix, cy);
    }
  }
  return grid_from_cells(occupied, resolution);
}

double grid_iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (a.resolution != b.resolution) {
    throw InvalidArgument("grid_iou: resolution mismatch");
  }
  const std::size_t inter = intersection_cells(a, b);
  const std::size_t uni = a.occupied + b.occupied - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PlaneMatchResult match_planes(const PointCloud& gt_cloud,
                              const std::vector<PlaneSegment>& gt_segments,
                              const PointCloud& pred_cloud,
                              const std::vector<PlaneSegment>& pred_segments, double resolution) {
  std::vector<OccupancyGrid> gt_grids;
  gt_grids.reserve(gt_segments.size());
  for (const PlaneSegment& s : gt_segments) gt_grids.push_back(footprint(s, gt_cloud, resolution));
  std::vector<OccupancyGrid> pred_grids;
  pred_grids.reserve(pred_segments.size());
  for (const PlaneSegment& s : pred_segments) {
    pred_grids.push_back(footprint(s, pred_cloud, resolution));
  }

  // Each prediction claims its largest-IoU ground-truth plane, provided the
  // intersection covers at least 40% of that plane.
  struct Claim {
    std::size_t pred;
    double iou;
  };
  std::vector<std::vector<Claim>> claims(gt_segments.size());
  for (std::size_t pi = 0; pi < pred_grids.size(); ++pi) {
    double best_iou = 0.0;
    std::size_t best_gt = 0;
    std::size_t best_inter = 0;
    for (std::size_t gi = 0; gi < gt_grids.size(); ++gi) {
      const std::size_t inter = intersection_cells(pred_grids[pi], gt_grids[gi]);
      const std::size_t uni = pred_grids[pi].occupied + gt_grids[gi].occupied - inter;
      const double iou = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = gi;
        best_inter = inter;
      }
    }
    if (best_iou <= 0.0) continue;
    if (static_cast<double>(best_inter) <
        0.4 * static_cast<double>(gt_grids[best_gt].occupied)) {
      continue;
    }
    claims[best_gt].push_back({pi, best_iou});
  }

  PlaneMatchResult result;
  for (std::size_t gi = 0; gi < claims.size(); ++gi) {
    if (claims[gi].empty()) continue;
    const Claim* winner = &claims[gi].front();
    for (const Claim& c : claims[gi]) {
      if (c.iou > winner->iou) winner = &c;
    }
    result.pairs.push_back({gi, winner->pred, winner->iou});
  }
  result.tp = result.pairs.size();
  result.fp = pred_segments.size() - result.tp;
  result.fn = gt_segments.size() - result.tp;
  return result;
}

RoofScores roof_scores(const PlaneMatchResult& m) {
  if (m.tp + m.fn == 0 || m.tp + m.fp == 0) {
    throw InvalidArgument(
        "roof_scores: no planes on one side, completeness/correctness undefined");
  }
  RoofScores s;
  s.completeness = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  s.correctness = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  s.quality = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp + m.fn);
  return s;
}

double outline_iou(const PointCloud& gt, const PointCloud& pred, std::optional<double> alpha,
                   double resolution) {
  const AlphaShape a = outline_2d(gt, alpha);
  const AlphaShape b = outline_2d(pred, alpha);
  const OccupancyGrid ga = rasterize_rings(a.rings, resolution);
  const OccupancyGrid gb = rasterize_rings(b.rings, resolution);
  return grid_iou(ga, gb);
}

DensityProfile density_profile(const PointCloud& gt, const PointCloud& pred, double radius) {
  validate_cloud(gt, "density_profile");
  validate_cloud(pred, "density_profile");
  if (!(radius > 0.0)) throw InvalidArgument("density_profile: radius must be positive");

  DensityProfile profile;
  profile.radius = radius;
  const std::size_t n = gt.size();
  profile.counts_gt.resize(n);
  profile.counts_pred.resize(n);

  const SpatialIndex gt_index(gt);
  const SpatialIndex pred_index(pred);
  parallel_chunks(0, n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto own = gt_index.radius_search(gt.points[i], radius);
      profile.counts_gt[i] = static_cast<std::uint32_t>(own.size() - 1);  // drop self
      profile.counts_pred[i] =
          static_cast<std::uint32_t>(pred_index.radius_search(gt.points[i], radius).size());
    }
  });

  auto summarize = [n](const std::vector<std::uint32_t>& counts, double& mean, double& var) {
    std::vector<double> vals(counts.begin(), counts.end());
    mean = pairwise_sum(vals) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = vals[i] - mean;
      vals[i] = d * d;
    }
    var = pairwise_sum(vals) / static_cast<double>(n);
  };
  summarize(profile.counts_gt, profile.mean_gt, profile.var_gt);
  summarize(profile.counts_pred, profile.mean_pred, profile.var_pred);
  return profile;
}

namespace {

RoofReport evaluate_impl(const PointCloud& gt, const PointCloud& pred, const EvalConfig& cfg,
                         const GroundTruthRoof* truth) {
  RoofReport report;
  auto note = [&report](const std::string& field, const std::exception& e) {
    report.notes.push_back(field + ": " + e.what());
  };

  const bool gt_padded =
      gt.has_labels() &&
      std::any_of(gt.labels->begin(), gt.labels->end(), [](Label l) { return l == Label::Pad; });
  const bool padded_protocol = cfg.pad == PadPolicy::WithPad ||
                               (cfg.pad == PadPolicy::Auto && gt_padded);

  auto emd_of = [&cfg](const PointCloud& a, const PointCloud& b,
                       std::uint64_t salt) -> std::optional<double> {
    if (a.size() == b.size()) return emd_distance(a, b);
    if (!cfg.emd_resample) return std::nullopt;
    const std::size_t n = std::min(a.size(), b.size());
    const PointCloud& big = a.size() > n ? a : b;
    const PointCloud down = resample(big, n, derive_seed(cfg.seed, "eval-emd", salt));
    return a.size() > n ? emd_distance(down, b) : emd_distance(a, down);
  };

  // Point metrics on the padded inputs.
  if (padded_protocol) {
    try {
      report.metrics.cd_with_pad = chamfer_distance(gt, pred);
      report.metrics.emd_with_pad = emd_of(gt, pred, 0);
    } catch (const std::exception& e) {
      note("with_pad", e);
    }
  }

  // Pad removal: exact labels for the ground truth, height threshold for the
  // (unlabeled) prediction.
  PointCloud gt_roof;
  PointCloud pred_roof;
  try {
    gt_roof = gt_padded ? remove_padding(gt, PadRemoval::Labels) : gt;
    pred_roof = padded_protocol
                    ? remove_padding(pred, PadRemoval::HeightCut, cfg.heightcut_margin)
                    : pred;
    validate_cloud(gt_roof, "evaluate_roof: ground truth after pad removal");
    validate_cloud(pred_roof, "evaluate_roof: prediction after pad removal");
  } catch (const std::exception& e) {
    note("pad_removal", e);
    report.sample = truth ? truth->id : report.sample;
    return report;
  }

  try {
    report.metrics.cd = chamfer_distance(gt_roof, pred_roof);
    report.metrics.emd = emd_of(gt_roof, pred_roof, 1);
  } catch (const std::exception& e) {
    note("point_metrics", e);
  }

  // Plane pipeline.
  try {
    std::vector<PlaneSegment> gt_segments;
    if (cfg.gt_planes == GtPlanes::TruthLabels) {
      if (!truth) {
        throw InvalidArgument("evaluate_roof: TruthLabels requires generator truth");
      }
      if (truth->facet_labels.size() != gt_roof.size()) {
        throw InvalidArgument(
            "evaluate_roof: facet labels do not line up with the unpadded ground truth");
      }
      // Facet labels as the plane set; indices refer to gt_roof, which equals
      // the generator cloud after exact pad removal.
      std::map<int, PlaneSegment> by_facet;
      for (std::size_t i = 0; i < truth->facet_labels.size(); ++i) {
        by_facet[truth->facet_labels[i]].indices.push_back(i);
      }
      for (auto& [facet, segment] : by_facet) {
        if (facet >= 0 && static_cast<std::size_t>(facet) < truth->facet_models.size()) {
          segment.model = truth->facet_models[facet];
        }
        gt_segments.push_back(std::move(segment));
      }
    } else {
      gt_segments = segment_planes(gt_roof, cfg.seg);
    }
    const std::vector<PlaneSegment> pred_segments = segment_planes(pred_roof, cfg.seg);
    report.gt_planes = gt_segments.size();
    report.pred_planes = pred_segments.size();
    report.matches =
        match_planes(gt_roof, gt_segments, pred_roof, pred_segments, cfg.grid_resolution);
    const RoofScores scores = roof_scores(report.matches);
    report.metrics.completeness = scores.completeness;
    report.metrics.correctness = scores.correctness;
    report.metrics.quality = scores.quality;
  } catch (const std::exception& e) {
    note("planes", e);
  }

  try {
    report.metrics.outline_iou = outline_iou(gt_roof, pred_roof, cfg.alpha, cfg.grid_resolution);
  } catch (const std::exception& e) {
    note("outline_iou", e);
  }

  try {
    report.density = density_profile(gt_roof, pred_roof, cfg.density_radius);
  } catch (const std::exception& e) {
    note("density", e);
  }

  if (truth) report.sample = truth->id;
  return report;
}

}  // namespace

RoofReport evaluate_roof(const PointCloud& gt, const PointCloud& pred, const EvalConfig& cfg) {
  if (cfg.gt_planes == GtPlanes::TruthLabels) {
    throw InvalidArgument("evaluate_roof: TruthLabels needs the GroundTruthRoof overload");
  }
  return evaluate_impl(gt, pred, cfg, nullptr);
}

RoofReport evaluate_roof(const GroundTruthRoof& truth, const PointCloud& gt,
                         const PointCloud& pred, const EvalConfig& cfg) {
  return evaluate_impl(gt, pred, cfg, &truth);
}

RoofReport evaluate_roof(const GroundTruthRoof& truth, const PointCloud& pred,
                         const EvalConfig& cfg) {
  return evaluate_impl(truth.cloud, pred, cfg, &truth);
}

}  // namespace roofkit
