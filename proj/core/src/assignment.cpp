#include <algorithm>
#include <cmath>
#include <limits>

#include "roofkit/errors.hpp"
#include "roofkit/metrics.hpp"
#include "roofkit/parallel.hpp"

namespace roofkit {

namespace {

#if defined(__SSE2__) || defined(_M_X64) || defined(__x86_64__)
#define ROOFKIT_AUCTION_SSE2 1
#include <emmintrin.h>
#endif

// Best and second-best bid value v_j = -cost_j - price_j in one pass.
// min/max lane tracking is exact, so the SIMD and scalar paths agree bitwise.
void best_two_values(const double* cost, const double* price, std::size_t n, double& best,
                     double& second) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  double b = neg_inf;
  double s = neg_inf;
  std::size_t j = 0;
#ifdef ROOFKIT_AUCTION_SSE2
  if (n >= 8) {
    __m128d vb0 = _mm_set1_pd(neg_inf), vs0 = vb0;
    __m128d vb1 = vb0, vs1 = vb0;
    const __m128d zero = _mm_setzero_pd();
    for (; j + 4 <= n; j += 4) {
      const __m128d v0 =
          _mm_sub_pd(_mm_sub_pd(zero, _mm_loadu_pd(cost + j)), _mm_loadu_pd(price + j));
      const __m128d v1 =
          _mm_sub_pd(_mm_sub_pd(zero, _mm_loadu_pd(cost + j + 2)), _mm_loadu_pd(price + j + 2));
      vs0 = _mm_max_pd(vs0, _mm_min_pd(vb0, v0));
      vb0 = _mm_max_pd(vb0, v0);
      vs1 = _mm_max_pd(vs1, _mm_min_pd(vb1, v1));
      vb1 = _mm_max_pd(vb1, v1);
    }
    double lb[4], ls[4];
    _mm_storeu_pd(lb, vb0);
    _mm_storeu_pd(lb + 2, vb1);
    _mm_storeu_pd(ls, vs0);
    _mm_storeu_pd(ls + 2, vs1);
    // Global (best, second) from the per-lane pairs.
    for (int lane = 0; lane < 4; ++lane) {
      for (double v : {lb[lane], ls[lane]}) {
        if (v > b) {
          s = b;
          b = v;
        } else if (v > s) {
          s = v;
        }
      }
    }
  }
#endif
  for (; j < n; ++j) {
    const double v = -cost[j] - price[j];
    if (v > b) {
      s = b;
      b = v;
    } else if (v > s) {
      s = v;
    }
  }
  best = b;
  second = s;
}

// Lowest index attaining the best value; same arithmetic as the scan above.
std::size_t locate_best(const double* cost, const double* price, std::size_t n, double best) {
  for (std::size_t j = 0; j < n; ++j) {
    if (-cost[j] - price[j] == best) return j;
  }
  return 0;
}

void check_pair(const PointCloud& p1, const PointCloud& p2, const char* context) {
  validate_cloud(p1, context);
  validate_cloud(p2, context);
  if (p1.size() != p2.size()) {
    throw InvalidArgument(std::string(context) + ": size mismatch " + std::to_string(p1.size()) +
                          " vs " + std::to_string(p2.size()) + " (resample first)");
  }
}

double mean_mapping_cost(const std::vector<double>& cost, std::size_t n,
                         const std::vector<std::size_t>& mapping) {
  std::vector<double> per_pair(n);
  for (std::size_t i = 0; i < n; ++i) per_pair[i] = cost[i * n + mapping[i]];
  return pairwise_sum(per_pair) / static_cast<double>(n);
}

}  // namespace

Assignment AssignmentSolver::solve(const PointCloud& p1, const PointCloud& p2, double eps) {
  return run(p1, p2, eps, /*relative=*/false);
}

Assignment AssignmentSolver::solve_relative(const PointCloud& p1, const PointCloud& p2,
                                            double slack_rel) {
  return run(p1, p2, slack_rel, /*relative=*/true);
}

Assignment AssignmentSolver::run(const PointCloud& p1, const PointCloud& p2, double eps,
                                 bool relative) {
  check_pair(p1, p2, "emd_assignment");
  if (!(eps > 0.0)) throw InvalidArgument("emd_assignment: eps must be > 0");

  const std::size_t n = p1.size();
  const bool warm = (n_ == n);
  n_ = n;
  cost_.resize(n * n);

  parallel_chunks(0, n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Point3 a = p1.points[i];
      double* row = cost_.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] = distance(a, p2.points[j]);
    }
  });

  double max_cost = 0.0;
  for (double c : cost_) max_cost = std::max(max_cost, c);

  Assignment result;
  result.mapping.resize(n);

  if (max_cost == 0.0) {
    // Every pair coincides; the identity is optimal.
    for (std::size_t i = 0; i < n; ++i) result.mapping[i] = i;
    result.total_cost = 0.0;
    return result;
  }

  // Prices and the matching both persist across calls; stale pairs are
  // re-auctioned by the violation sweep below, so a warm start only saves
  // work, never accuracy.
  if (!warm) {
    prices_.assign(n, 0.0);
    owner_.assign(n, -1);     // object -> person
    assigned_.assign(n, -1);  // person -> object
  }
  queue_.resize(n);

  const double eps_total = relative ? eps * max_cost : eps;
  const double eps_floor = eps_total / static_cast<double>(n);
  double phase_eps = warm ? std::max(max_cost / 256.0, eps_floor / 4.0) : max_cost / 4.0;

  while (true) {
    // Epsilon-complementary-slackness sweep: unassign pairs that violate the
    // current phase's slack. Kept pairs stay valid for the rest of the phase
    // because prices only rise.
    std::size_t head = 0;
    std::size_t tail = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      const int j = assigned_[i];
      if (j < 0) {
        queue_[tail++ % n] = i;
        continue;
      }
      const double* row = cost_.data() + static_cast<std::size_t>(i) * n;
      double best, second;
      best_two_values(row, prices_.data(), n, best, second);
      if (-row[j] - prices_[j] < best - phase_eps) {
        owner_[j] = -1;
        assigned_[i] = -1;
        queue_[tail++ % n] = i;
      }
    }

    while (head != tail) {
      const std::uint32_t person = queue_[head % n];
      ++head;

      const double* row = cost_.data() + static_cast<std::size_t>(person) * n;
      double best, second;
      best_two_values(row, prices_.data(), n, best, second);
      const std::size_t best_j = locate_best(row, prices_.data(), n, best);
      const double raise = (n == 1 ? 0.0 : best - second) + phase_eps;
      prices_[best_j] += raise;

      const int displaced = owner_[best_j];
      owner_[best_j] = static_cast<int>(person);
      assigned_[person] = static_cast<int>(best_j);
      if (displaced >= 0) {
        assigned_[displaced] = -1;
        queue_[tail % n] = static_cast<std::uint32_t>(displaced);
        ++tail;
      }
    }

    if (phase_eps < eps_floor) break;
    phase_eps /= 4.0;
  }

  for (std::size_t i = 0; i < n; ++i) result.mapping[i] = static_cast<std::size_t>(assigned_[i]);
  result.total_cost = mean_mapping_cost(cost_, n, result.mapping);
  return result;
}

Assignment emd_assignment(const PointCloud& p1, const PointCloud& p2, double eps) {
  AssignmentSolver solver;
  return solver.solve(p1, p2, eps);
}

}  // namespace roofkit
