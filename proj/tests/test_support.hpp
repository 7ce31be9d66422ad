#pragma once

// Shared fixtures and independent oracles for the test suites. Everything in
// here must stay independent of the implementation paths it checks:
// exhaustive scans, brute-force enumeration, and finite differences only.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "roofkit/geometry.hpp"
#include "roofkit/metrics.hpp"
#include "roofkit/rng.hpp"

namespace testsupport {

using roofkit::Gradient;
using roofkit::Point3;
using roofkit::PointCloud;
using roofkit::Rng;
using roofkit::Vec3;

inline PointCloud random_cloud(std::uint64_t seed, std::size_t n, double lo = 0.0,
                               double hi = 1.0) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
  }
  return cloud;
}

// O(n1*n2) Chamfer oracle, lowest-index ties.
inline double chamfer_oracle(const PointCloud& p1, const PointCloud& p2) {
  auto one_way = [](const PointCloud& a, const PointCloud& b) {
    double sum = 0.0;
    for (const Point3& x : a.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const Point3& y : b.points) {
        best = std::min(best, roofkit::squared_distance(x, y));
      }
      sum += best;
    }
    return sum / static_cast<double>(a.size());
  };
  return one_way(p1, p2) + one_way(p2, p1);
}

// Exhaustive k-NN with the (distance, index) tie rule.
inline std::vector<std::pair<double, std::size_t>> knn_oracle(const PointCloud& cloud,
                                                              const Point3& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    all.emplace_back(roofkit::squared_distance(q, cloud.points[i]), i);
  }
  std::sort(all.begin(), all.end());
  all.resize(std::min(k, all.size()));
  return all;
}

// Central finite differences of an arbitrary scalar function of a cloud.
template <typename F>
Gradient finite_difference(const PointCloud& cloud, const F& f, double h = 1e-5) {
  Gradient grad(cloud.size());
  PointCloud work = cloud;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double* coords[3] = {&work.points[i].x, &work.points[i].y, &work.points[i].z};
    double out[3];
    for (int c = 0; c < 3; ++c) {
      const double saved = *coords[c];
      *coords[c] = saved + h;
      const double fp = f(work);
      *coords[c] = saved - h;
      const double fm = f(work);
      *coords[c] = saved;
      out[c] = (fp - fm) / (2.0 * h);
    }
    grad[i] = {out[0], out[1], out[2]};
  }
  return grad;
}

// Margin between best and second-best neighbor distance, both directions.
// Configurations below the margin sit near a nearest-neighbor tie where the
// Chamfer subgradient is not a classic gradient.
inline double nn_tie_margin(const PointCloud& p1, const PointCloud& p2) {
  double margin = std::numeric_limits<double>::infinity();
  auto one_way = [&margin](const PointCloud& a, const PointCloud& b) {
    for (const Point3& x : a.points) {
      double d1 = std::numeric_limits<double>::infinity();
      double d2 = d1;
      for (const Point3& y : b.points) {
        const double d = roofkit::distance(x, y);
        if (d < d1) {
          d2 = d1;
          d1 = d;
        } else if (d < d2) {
          d2 = d;
        }
      }
      if (b.size() > 1) margin = std::min(margin, d2 - d1);
      margin = std::min(margin, d1);  // coincidence is a kink for the assignment loss
    }
  };
  one_way(p1, p2);
  one_way(p2, p1);
  return margin;
}

inline double max_rel_error(const Gradient& got, const Gradient& want) {
  double worst = 0.0;
  double scale = 0.0;
  for (const Vec3& w : want) scale = std::max(scale, roofkit::norm(w));
  if (scale == 0.0) scale = 1.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    worst = std::max(worst, roofkit::norm(got[i] - want[i]) / scale);
  }
  return worst;
}

}  // namespace testsupport
