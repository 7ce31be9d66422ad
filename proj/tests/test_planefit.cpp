#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "roofkit/dataset.hpp"
#include "roofkit/errors.hpp"
#include "roofkit/planefit.hpp"
#include "test_support.hpp"

using namespace roofkit;
using testsupport::Rng;

namespace {

constexpr double kRad = 0.017453292519943295;

PointCloud plane_patch(std::uint64_t seed, std::size_t n, double a, double b, double c,
                       double sigma = 0.0) {
  Rng rng(seed);
  PointCloud cloud;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-5.0, 5.0);
    const double y = rng.uniform(-5.0, 5.0);
    const double noise = sigma > 0.0 ? rng.gaussian(0.0, sigma) : 0.0;
    cloud.points.push_back({x, y, a * x + b * y + c + noise});
  }
  return cloud;
}

double angle_between(const Vec3& u, const Vec3& v) {
  return std::acos(std::clamp(std::abs(dot(u, v)) / (norm(u) * norm(v)), 0.0, 1.0));
}

}  // namespace

TEST_CASE("estimate_normals on exact planes") {
  // z = 0
  const PointCloud flat = plane_patch(1, 100, 0.0, 0.0, 0.0);
  for (const Vec3& n : estimate_normals(flat, 10)) {
    CHECK(angle_between(n, {0, 0, 1}) < 1e-6);
    CHECK(n.z > 0.0);
  }

  // x + z = 0, normal (1,0,1)/sqrt2 after the upward flip
  const PointCloud tilted = plane_patch(2, 100, -1.0, 0.0, 0.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (const Vec3& n : estimate_normals(tilted, 10)) {
    CHECK(angle_between(n, {inv_sqrt2, 0, inv_sqrt2}) < 1e-6);
  }

  // z = x, normal (-1,0,1)/sqrt2
  const PointCloud ramp = plane_patch(3, 100, 1.0, 0.0, 0.0);
  for (const Vec3& n : estimate_normals(ramp, 10)) {
    CHECK(angle_between(n, {-inv_sqrt2, 0, inv_sqrt2}) < 1e-6);
  }

  CHECK_THROWS_AS(estimate_normals(flat, 101), InvalidArgument);
  CHECK_THROWS_AS(estimate_normals(flat, 2), InvalidArgument);
}

TEST_CASE("normals on a noisy gable stay close to the facet truth") {
  RoofSpec spec;
  spec.kind = RoofKind::Gable;
  spec.width = 12;
  spec.depth = 8;
  spec.pitch_deg = 25;
  spec.density = 8;
  spec.noise_sigma = 0.03;
  spec.seed = 99;
  const GroundTruthRoof roof = generate_roof(spec);
  const auto normals = estimate_normals(roof.cloud, 12);

  std::map<int, Vec3> sums;
  std::map<int, int> counts;
  for (std::size_t i = 0; i < normals.size(); ++i) {
    sums[roof.facet_labels[i]] += normals[i];
    counts[roof.facet_labels[i]] += 1;
  }
  for (const auto& [facet, sum] : sums) {
    const Vec3 mean = sum / static_cast<double>(counts[facet]);
    CHECK(angle_between(mean, roof.facet_models[facet].normal) < 5.0 * kRad);
  }
}

TEST_CASE("fit_plane") {
  PointCloud square;
  square.points = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  std::vector<std::size_t> all{0, 1, 2, 3};
  const PlaneModel flat = fit_plane(square, all);
  CHECK(angle_between(flat.normal, {0, 0, 1}) < 1e-9);
  CHECK(flat.offset == doctest::Approx(0.0));

  PointCloud high = square;
  for (Point3& p : high.points) p.z = 2.0;
  const PlaneModel z2 = fit_plane(high, all);
  CHECK(z2.offset == doctest::Approx(-2.0));

  const PointCloud noisy = plane_patch(5, 50, 1.0, 0.0, 0.0, 0.01);
  std::vector<std::size_t> idx(noisy.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const PlaneModel ramp = fit_plane(noisy, idx);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(angle_between(ramp.normal, {-inv_sqrt2, 0, inv_sqrt2}) < 1.0 * kRad);

  SUBCASE("degenerate selections") {
    PointCloud line;
    line.points = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
    CHECK_THROWS_AS(fit_plane(line, {0, 1, 2, 3}), InvalidArgument);
    CHECK_THROWS_AS(fit_plane(square, {0, 1}), InvalidArgument);
  }
}

TEST_CASE("fit_plane beats axis-aligned planes through the centroid") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed ^ 0x5151);
    const PointCloud cloud = plane_patch(seed + 50, 60, rng.uniform(-1, 1), rng.uniform(-1, 1),
                                         rng.uniform(-2, 2), 0.05);
    std::vector<std::size_t> idx(cloud.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const PlaneModel model = fit_plane(cloud, idx);

    Point3 centroid{};
    for (const Point3& p : cloud.points) centroid += p;
    centroid = centroid / static_cast<double>(cloud.size());

    auto rms_of = [&](const PlaneModel& m) {
      double sum = 0.0;
      for (const Point3& p : cloud.points) {
        const double d = m.signed_distance(p);
        sum += d * d;
      }
      return std::sqrt(sum / static_cast<double>(cloud.size()));
    };
    const double fit_rms = rms_of(model);
    const PlaneModel axis_planes[3] = {
        canonicalize({{1, 0, 0}, -centroid.x}),
        canonicalize({{0, 1, 0}, -centroid.y}),
        canonicalize({{0, 0, 1}, -centroid.z}),
    };
    for (const PlaneModel& m : axis_planes) CHECK(fit_rms <= rms_of(m) + 1e-12);
  }
}

namespace {

GroundTruthRoof make_roof(RoofKind kind, double pitch, double sigma, std::uint64_t seed,
                          double density = 16.0) {
  RoofSpec spec;
  spec.kind = kind;
  spec.width = 12;
  spec.depth = 8;
  spec.pitch_deg = pitch;
  spec.density = density;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  return generate_roof(spec);
}

// Coverage: fraction of each facet recovered by its best segment.
// Purity: fraction of each segment agreeing with its majority facet.
void check_against_truth(const GroundTruthRoof& roof, const std::vector<PlaneSegment>& segments,
                         double min_coverage, double min_purity) {
  std::map<int, std::size_t> facet_sizes;
  for (int f : roof.facet_labels) facet_sizes[f] += 1;

  std::map<int, std::size_t> best_overlap;
  for (const PlaneSegment& segment : segments) {
    std::map<int, std::size_t> votes;
    for (std::size_t i : segment.indices) votes[roof.facet_labels[i]] += 1;
    std::size_t majority = 0;
    int winner = -1;
    for (const auto& [facet, count] : votes) {
      if (count > majority) {
        majority = count;
        winner = facet;
      }
    }
    CHECK(static_cast<double>(majority) >=
          min_purity * static_cast<double>(segment.indices.size()));
    best_overlap[winner] = std::max(best_overlap[winner], majority);
  }
  for (const auto& [facet, size] : facet_sizes) {
    CHECK(static_cast<double>(best_overlap[facet]) >= min_coverage * static_cast<double>(size));
  }
}

}  // namespace

TEST_CASE("segment_planes recovers synthetic roofs") {
  SegmentationParams params;  // defaults

  SUBCASE("flat roof gives one segment with nearly all points") {
    const GroundTruthRoof roof = make_roof(RoofKind::Flat, 0, 0, 11);
    const auto segments = segment_planes(roof.cloud, params);
    REQUIRE(segments.size() == 1);
    CHECK(static_cast<double>(segments[0].indices.size()) >=
          0.99 * static_cast<double>(roof.cloud.size()));
  }

  SUBCASE("gable gives two clean facets") {
    const GroundTruthRoof roof = make_roof(RoofKind::Gable, 30, 0, 12, 20.0);
    const auto segments = segment_planes(roof.cloud, params);
    REQUIRE(segments.size() == 2);
    check_against_truth(roof, segments, 0.95, 0.95);
  }

  SUBCASE("hip gives four facets") {
    const GroundTruthRoof roof = make_roof(RoofKind::Hip, 25, 0, 13, 20.0);
    const auto segments = segment_planes(roof.cloud, params);
    REQUIRE(segments.size() == 4);
    check_against_truth(roof, segments, 0.80, 0.95);
  }

  SUBCASE("members stay within the distance threshold and segments are disjoint") {
    const GroundTruthRoof roof = make_roof(RoofKind::Gable, 20, 0.03, 14);
    const auto segments = segment_planes(roof.cloud, params);
    std::set<std::size_t> seen;
    for (const PlaneSegment& segment : segments) {
      CHECK(std::is_sorted(segment.indices.begin(), segment.indices.end()));
      for (std::size_t i : segment.indices) {
        CHECK(segment.model.distance(roof.cloud.points[i]) <= params.distance_threshold + 1e-12);
        CHECK(seen.insert(i).second);  // no index appears twice
      }
      CHECK(segment.rms >= 0.0);
      CHECK(norm(segment.model.normal) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(segment.model.normal.z >= 0.0);
    }
  }

  SUBCASE("deterministic output") {
    const GroundTruthRoof roof = make_roof(RoofKind::Hip, 22, 0.03, 15);
    const auto a = segment_planes(roof.cloud, params);
    const auto b = segment_planes(roof.cloud, params);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].indices == b[i].indices);
      CHECK(a[i].model.offset == b[i].model.offset);
    }
  }

  SUBCASE("ordering is by descending size") {
    const GroundTruthRoof roof = make_roof(RoofKind::Hip, 25, 0, 16, 20.0);
    const auto segments = segment_planes(roof.cloud, params);
    for (std::size_t i = 1; i < segments.size(); ++i) {
      CHECK(segments[i - 1].indices.size() >= segments[i].indices.size());
    }
  }

  SUBCASE("cloud smaller than min_points") {
    const PointCloud tiny = plane_patch(17, 10, 0, 0, 0);
    CHECK_THROWS_AS(segment_planes(tiny, params), InvalidArgument);
  }
}
