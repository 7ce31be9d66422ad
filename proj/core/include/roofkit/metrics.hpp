#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "roofkit/geometry.hpp"

namespace roofkit {

/// Bijection between two equal-size clouds: mapping[i] is the partner in the
/// second cloud of point i in the first; total_cost is the mean pairwise
/// distance under that pairing.
struct Assignment {
  std::vector<std::size_t> mapping;
  double total_cost = 0.0;
};

/// The staged loss: a Chamfer term on the intermediate cloud plus an
/// alpha-weighted assignment term on the final cloud.
struct LossBreakdown {
  double cd_inter = 0.0;   // squared meters
  double emd_final = 0.0;  // meters
  double alpha = 0.0;
  double total = 0.0;      // always cd_inter + alpha * emd_final, bit-exact
};

inline LossBreakdown make_loss_breakdown(double cd_inter, double emd_final, double alpha) {
  return {cd_inter, emd_final, alpha, cd_inter + alpha * emd_final};
}

/// Per-point loss gradient, same length and order as the cloud it refers to.
using Gradient = std::vector<Vec3>;

/// Symmetric Chamfer distance: mean squared nearest-neighbor distance in both
/// directions. Detail-sensitive, density-blind.
double chamfer_distance(const PointCloud& p1, const PointCloud& p2);

/// Analytic (sub)gradients of chamfer_distance with respect to both clouds.
/// At nearest-neighbor ties the lowest-index neighbor defines the subgradient.
std::pair<Gradient, Gradient> chamfer_gradient(const PointCloud& p1, const PointCloud& p2);

/// Near-optimal assignment between equal-size clouds via a forward auction
/// with epsilon scaling. `eps` is the absolute slack allowed on the total
/// (not mean) pairwise cost; the scaling schedule starts at max-cost/4 and
/// divides by 4 until epsilon drops below eps/n. Deterministic.
Assignment emd_assignment(const PointCloud& p1, const PointCloud& p2, double eps);

/// Mean assignment cost under emd_assignment with a scale-relative default
/// slack. Density-sensitive counterpart to chamfer_distance.
double emd_distance(const PointCloud& p1, const PointCloud& p2);

/// Gradient of the mean assignment cost with respect to p1, at frozen
/// assignment. Zero where a point coincides with its partner.
Gradient emd_gradient(const PointCloud& p1, const PointCloud& p2, const Assignment& assignment);

/// Chamfer value plus its gradient with respect to p1 in one pass, against a
/// prebuilt index over p2. The optimizer's inner loop.
double chamfer_value_and_gradient(const PointCloud& p1, const PointCloud& p2,
                                  const class SpatialIndex& index2, Gradient& grad_p1);

/// Staged combined loss: Chamfer on (x_inter, y) plus alpha times the
/// assignment distance on (y, x_final).
LossBreakdown combined_loss(const PointCloud& x_inter, const PointCloud& x_final,
                            const PointCloud& y, double alpha);

/// Exact optimal mean assignment cost by exhaustive permutation search.
/// Guarded to n <= 9; exists as the oracle for emd_distance.
double brute_force_emd(const PointCloud& p1, const PointCloud& p2);

/// Fraction of the maximum pairwise cost used as the default total slack in
/// emd_distance.
inline constexpr double kDefaultEmdSlackRel = 1e-4;

/// Reusable auction solver. Keeps its cost-matrix buffer and price vector so
/// the optimizer can re-solve slightly-moved clouds without reallocating;
/// prices are reused as a warm start when the problem size is unchanged.
class AssignmentSolver {
 public:
  /// Absolute total-cost slack, per the scaling schedule documented above.
  Assignment solve(const PointCloud& p1, const PointCloud& p2, double eps);

  /// Slack expressed as a fraction of the maximum pairwise cost.
  Assignment solve_relative(const PointCloud& p1, const PointCloud& p2, double slack_rel);

 private:
  Assignment run(const PointCloud& p1, const PointCloud& p2, double eps, bool relative);

  std::vector<double> cost_;
  std::vector<double> prices_;
  std::vector<int> owner_;
  std::vector<int> assigned_;
  std::vector<std::uint32_t> queue_;
  std::size_t n_ = 0;
};

}  // namespace roofkit
