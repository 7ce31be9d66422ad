#include "roofkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "roofkit/errors.hpp"
#include "roofkit/parallel.hpp"
#include "roofkit/spatial_index.hpp"

namespace roofkit {

namespace {

// Nearest-neighbor index of every point of `from` in `to` (lowest index wins
// on ties), plus the squared distances.
void nearest_into(const PointCloud& from, const SpatialIndex& to_index,
                  std::vector<std::size_t>& nn, std::vector<double>& sq) {
  const std::size_t n = from.size();
  nn.resize(n);
  sq.resize(n);
  parallel_chunks(0, n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Neighbor nb = to_index.nearest(from.points[i]);
      nn[i] = nb.index;
      sq[i] = nb.distance * nb.distance;
    }
  });
}

}  // namespace

double chamfer_distance(const PointCloud& p1, const PointCloud& p2) {
  validate_cloud(p1, "chamfer_distance");
  validate_cloud(p2, "chamfer_distance");
  const SpatialIndex idx1(p1);
  const SpatialIndex idx2(p2);
  std::vector<std::size_t> nn;
  std::vector<double> sq12, sq21;
  nearest_into(p1, idx2, nn, sq12);
  nearest_into(p2, idx1, nn, sq21);
  return pairwise_sum(sq12) / static_cast<double>(p1.size()) +
         pairwise_sum(sq21) / static_cast<double>(p2.size());
}

std::pair<Gradient, Gradient> chamfer_gradient(const PointCloud& p1, const PointCloud& p2) {
  validate_cloud(p1, "chamfer_gradient");
  validate_cloud(p2, "chamfer_gradient");
  const std::size_t n1 = p1.size();
  const std::size_t n2 = p2.size();
  const SpatialIndex idx1(p1);
  const SpatialIndex idx2(p2);
  std::vector<std::size_t> nn12, nn21;
  std::vector<double> sq;
  nearest_into(p1, idx2, nn12, sq);
  nearest_into(p2, idx1, nn21, sq);

  Gradient g1(n1, Vec3{});
  Gradient g2(n2, Vec3{});
  const double w1 = 2.0 / static_cast<double>(n1);
  const double w2 = 2.0 / static_cast<double>(n2);

  for (std::size_t i = 0; i < n1; ++i) {
    g1[i] += (p1.points[i] - p2.points[nn12[i]]) * w1;
    g2[nn12[i]] += (p2.points[nn12[i]] - p1.points[i]) * w1;
  }
  for (std::size_t j = 0; j < n2; ++j) {
    g2[j] += (p2.points[j] - p1.points[nn21[j]]) * w2;
    g1[nn21[j]] += (p1.points[nn21[j]] - p2.points[j]) * w2;
  }
  return {std::move(g1), std::move(g2)};
}

double chamfer_value_and_gradient(const PointCloud& p1, const PointCloud& p2,
                                  const SpatialIndex& index2, Gradient& grad_p1) {
  validate_cloud(p1, "chamfer_value_and_gradient");
  const std::size_t n1 = p1.size();
  const std::size_t n2 = p2.size();
  const SpatialIndex idx1(p1);
  std::vector<std::size_t> nn12, nn21;
  std::vector<double> sq12, sq21;
  nearest_into(p1, index2, nn12, sq12);
  nearest_into(p2, idx1, nn21, sq21);

  grad_p1.assign(n1, Vec3{});
  const double w1 = 2.0 / static_cast<double>(n1);
  const double w2 = 2.0 / static_cast<double>(n2);
  for (std::size_t i = 0; i < n1; ++i) {
    grad_p1[i] += (p1.points[i] - p2.points[nn12[i]]) * w1;
  }
  for (std::size_t j = 0; j < n2; ++j) {
    grad_p1[nn21[j]] += (p1.points[nn21[j]] - p2.points[j]) * w2;
  }
  return pairwise_sum(sq12) / static_cast<double>(n1) +
         pairwise_sum(sq21) / static_cast<double>(n2);
}

double emd_distance(const PointCloud& p1, const PointCloud& p2) {
  AssignmentSolver solver;
  return solver.solve_relative(p1, p2, kDefaultEmdSlackRel).total_cost;
}

Gradient emd_gradient(const PointCloud& p1, const PointCloud& p2, const Assignment& assignment) {
  validate_cloud(p1, "emd_gradient");
  validate_cloud(p2, "emd_gradient");
  const std::size_t n = p1.size();
  if (assignment.mapping.size() != n) {
    throw InvalidArgument("emd_gradient: assignment size " +
                          std::to_string(assignment.mapping.size()) + " != cloud size " +
                          std::to_string(n));
  }
  Gradient grad(n, Vec3{});
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = assignment.mapping[i];
    if (j >= p2.size()) {
      throw InvalidArgument("emd_gradient: mapping index out of range");
    }
    const Vec3 d = p1.points[i] - p2.points[j];
    const double len = norm(d);
    if (len > 0.0) grad[i] = d * (inv_n / len);
  }
  return grad;
}

LossBreakdown combined_loss(const PointCloud& x_inter, const PointCloud& x_final,
                            const PointCloud& y, double alpha) {
  if (alpha < 0.0) throw InvalidArgument("combined_loss: alpha must be >= 0");
  const double cd = chamfer_distance(x_inter, y);
  const double emd = emd_distance(y, x_final);
  return make_loss_breakdown(cd, emd, alpha);
}

double brute_force_emd(const PointCloud& p1, const PointCloud& p2) {
  validate_cloud(p1, "brute_force_emd");
  validate_cloud(p2, "brute_force_emd");
  const std::size_t n = p1.size();
  if (n != p2.size()) {
    throw InvalidArgument("brute_force_emd: size mismatch");
  }
  if (n > 9) {
    throw InvalidArgument("brute_force_emd: guarded to n <= 9, got " + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += distance(p1.points[i], p2.points[perm[i]]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

}  // namespace roofkit
