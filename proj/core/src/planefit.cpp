#include "roofkit/planefit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "roofkit/errors.hpp"
#include "roofkit/parallel.hpp"
#include "roofkit/spatial_index.hpp"

namespace roofkit {

namespace {

struct LocalFit {
  Vec3 normal;
  double curvature = 0.0;  // smallest eigenvalue / trace
};

// Covariance eigendecomposition of a point subset. Returns the eigenvector of
// the smallest eigenvalue plus the eigenvalues themselves (ascending).
LocalFit covariance_normal(const std::vector<Point3>& pts, const std::size_t* idx,
                           std::size_t count, double* lambdas = nullptr) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < count; ++i) {
    const Point3& p = pts[idx[i]];
    mean += Eigen::Vector3d(p.x, p.y, p.z);
  }
  mean /= static_cast<double>(count);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < count; ++i) {
    const Point3& p = pts[idx[i]];
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(count);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d n = solver.eigenvectors().col(0);
  const Eigen::Vector3d ev = solver.eigenvalues();
  if (lambdas) {
    lambdas[0] = ev(0);
    lambdas[1] = ev(1);
    lambdas[2] = ev(2);
  }
  LocalFit fit;
  fit.normal = {n(0), n(1), n(2)};
  const double trace = ev(0) + ev(1) + ev(2);
  fit.curvature = trace > 0.0 ? ev(0) / trace : 0.0;
  return fit;
}

Vec3 canonical_direction(Vec3 n) {
  const bool flip = n.z < 0.0 || (n.z == 0.0 && (n.x < 0.0 || (n.x == 0.0 && n.y < 0.0)));
  return flip ? Vec3{-n.x, -n.y, -n.z} : n;
}

PlaneModel plane_through(const Point3& p, const Vec3& n) {
  return canonicalize({n, -dot(n, p)});
}

// Normals, curvatures, and the k-NN adjacency in one pass.
void local_surface(const PointCloud& cloud, std::size_t k, std::vector<Vec3>& normals,
                   std::vector<double>& curvature, std::vector<std::size_t>* knn) {
  const std::size_t n = cloud.size();
  const SpatialIndex index(cloud);
  normals.resize(n);
  curvature.resize(n);
  if (knn) knn->resize(n * k);
  parallel_chunks(0, n, [&](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> ids(k);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto neighbors = index.k_nearest(cloud.points[i], k);
      for (std::size_t j = 0; j < k; ++j) ids[j] = neighbors[j].index;
      const LocalFit fit = covariance_normal(cloud.points, ids.data(), k);
      normals[i] = canonical_direction(fit.normal);
      curvature[i] = fit.curvature;
      if (knn) std::copy(ids.begin(), ids.end(), knn->begin() + i * k);
    }
  });
}

}  // namespace

PlaneModel canonicalize(PlaneModel model) {
  const Vec3 n = model.normal;
  const bool flip = n.z < 0.0 || (n.z == 0.0 && (n.x < 0.0 || (n.x == 0.0 && n.y < 0.0)));
  if (flip) {
    model.normal = {-n.x, -n.y, -n.z};
    model.offset = -model.offset;
  }
  return model;
}

std::vector<Vec3> estimate_normals(const PointCloud& cloud, std::size_t k) {
  validate_cloud(cloud, "estimate_normals");
  if (k < 3) throw InvalidArgument("estimate_normals: k must be >= 3");
  if (cloud.size() < k) {
    throw InvalidArgument("estimate_normals: cloud has " + std::to_string(cloud.size()) +
                          " points, need at least k = " + std::to_string(k));
  }
  std::vector<Vec3> normals;
  std::vector<double> curvature;
  local_surface(cloud, k, normals, curvature, nullptr);
  return normals;
}

PlaneModel fit_plane(const PointCloud& cloud, const std::vector<std::size_t>& indices) {
  validate_cloud(cloud, "fit_plane");
  if (indices.size() < 3) throw InvalidArgument("fit_plane: need at least 3 points");
  for (std::size_t i : indices) {
    if (i >= cloud.size()) throw InvalidArgument("fit_plane: index out of range");
  }
  double lambdas[3];
  const LocalFit fit = covariance_normal(cloud.points, indices.data(), indices.size(), lambdas);
  if (!(lambdas[1] > 1e-12 * std::max(lambdas[2], 1e-300))) {
    throw InvalidArgument("fit_plane: selection is rank-deficient (collinear points)");
  }
  Point3 centroid{};
  for (std::size_t i : indices) centroid += cloud.points[i];
  centroid = centroid / static_cast<double>(indices.size());
  return plane_through(centroid, fit.normal);
}

std::vector<PlaneSegment> segment_planes(const PointCloud& cloud,
                                         const SegmentationParams& params) {
  validate_cloud(cloud, "segment_planes");
  if (params.k_normals < 3 || params.min_points < 3) {
    throw InvalidArgument("segment_planes: k_normals and min_points must be >= 3");
  }
  if (!(params.angle_threshold > 0.0) || !(params.distance_threshold > 0.0)) {
    throw InvalidArgument("segment_planes: thresholds must be positive");
  }
  const std::size_t n = cloud.size();
  if (n < params.min_points) {
    throw InvalidArgument("segment_planes: cloud smaller than min_points");
  }
  const std::size_t k = std::min(params.k_normals, n);

  std::vector<Vec3> normals;
  std::vector<double> curvature;
  std::vector<std::size_t> knn;
  local_surface(cloud, k, normals, curvature, &knn);

  std::vector<std::size_t> seeds(n);
  std::iota(seeds.begin(), seeds.end(), 0);
  std::sort(seeds.begin(), seeds.end(), [&](std::size_t a, std::size_t b) {
    if (curvature[a] != curvature[b]) return curvature[a] < curvature[b];
    return a < b;
  });

  const double cos_threshold = std::cos(params.angle_threshold);
  std::vector<char> assigned(n, 0);
  std::vector<char> seed_spent(n, 0);

  struct Region {
    std::vector<std::size_t> members;
    std::size_t seed;
  };
  std::vector<Region> regions;

  std::vector<std::size_t> frontier;
  for (std::size_t seed : seeds) {
    if (assigned[seed] || seed_spent[seed]) continue;

    const Vec3 seed_normal = normals[seed];
    PlaneModel plane = plane_through(cloud.points[seed], seed_normal);
    Region region;
    region.seed = seed;
    region.members.push_back(seed);
    assigned[seed] = 1;
    frontier.assign(1, seed);
    std::size_t next_refit = 20;

    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const std::size_t current = frontier[f];
      const std::size_t* nbrs = knn.data() + current * k;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t q = nbrs[j];
        if (assigned[q]) continue;
        if (std::abs(dot(normals[q], seed_normal)) < cos_threshold) continue;
        if (plane.distance(cloud.points[q]) > params.distance_threshold) continue;
        assigned[q] = 1;
        region.members.push_back(q);
        frontier.push_back(q);
        if (region.members.size() >= next_refit && region.members.size() >= 3) {
          try {
            plane = fit_plane(cloud, region.members);
          } catch (const InvalidArgument&) {
            // rank-deficient so far; keep the previous plane
          }
          next_refit += 20;
        }
      }
    }

    seed_spent[seed] = 1;
    if (region.members.size() < params.min_points) {
      for (std::size_t m : region.members) assigned[m] = 0;  // return to the pool
      continue;
    }
    regions.push_back(std::move(region));
  }

  std::vector<PlaneSegment> segments;
  std::vector<std::size_t> seg_seed;
  for (Region& region : regions) {
    std::sort(region.members.begin(), region.members.end());
    // Final refit; drop members the refit pushed past the threshold.
    PlaneModel model;
    try {
      model = fit_plane(cloud, region.members);
    } catch (const InvalidArgument&) {
      continue;  // degenerate region, not a plane
    }
    for (int pass = 0; pass < 20; ++pass) {
      std::vector<std::size_t> kept;
      kept.reserve(region.members.size());
      for (std::size_t m : region.members) {
        if (model.distance(cloud.points[m]) <= params.distance_threshold) kept.push_back(m);
      }
      if (kept.size() == region.members.size()) break;
      region.members = std::move(kept);
      if (region.members.size() < params.min_points) break;
      model = fit_plane(cloud, region.members);
    }
    if (region.members.size() < params.min_points) continue;

    PlaneSegment segment;
    segment.indices = region.members;
    segment.model = model;
    std::vector<double> sq(segment.indices.size());
    for (std::size_t i = 0; i < segment.indices.size(); ++i) {
      const double d = model.signed_distance(cloud.points[segment.indices[i]]);
      sq[i] = d * d;
    }
    segment.rms = std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
    segments.push_back(std::move(segment));
    seg_seed.push_back(region.seed);
  }

  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (segments[a].indices.size() != segments[b].indices.size()) {
      return segments[a].indices.size() > segments[b].indices.size();
    }
    return seg_seed[a] < seg_seed[b];
  });
  std::vector<PlaneSegment> ordered;
  ordered.reserve(segments.size());
  for (std::size_t i : order) ordered.push_back(std::move(segments[i]));
  return ordered;
}

}  // namespace roofkit
