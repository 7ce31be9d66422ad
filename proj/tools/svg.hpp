#pragma once

#include <string>
#include <vector>

#include "roofkit/geometry.hpp"
#include "roofkit/optim.hpp"

namespace roofkit::cli {

/// Loss curves over iterations (cd, emd, total), log-free linear axes.
std::string svg_loss_curves(const std::vector<HistoryEntry>& history);

/// Grouped box plots of fixed-radius neighbor counts; one box per labeled
/// series.
struct BoxSeries {
  std::string label;
  std::vector<std::uint32_t> counts;
};
std::string svg_density_boxplot(const std::vector<BoxSeries>& series, double radius);

/// Top-down scatter of the cloud, points colored by height.
std::string svg_cloud_topdown(const PointCloud& cloud);

}  // namespace roofkit::cli
