#include <doctest.h>

#include <cmath>

#include "roofkit/errors.hpp"
#include "roofkit/metrics.hpp"
#include "test_support.hpp"

using namespace roofkit;
using testsupport::chamfer_oracle;
using testsupport::finite_difference;
using testsupport::max_rel_error;
using testsupport::nn_tie_margin;
using testsupport::random_cloud;

namespace {

PointCloud single(double x, double y, double z) {
  PointCloud c;
  c.points = {{x, y, z}};
  return c;
}

PointCloud translated(const PointCloud& cloud, const Vec3& t) {
  PointCloud out = cloud;
  for (Point3& p : out.points) p += t;
  return out;
}

PointCloud scaled(const PointCloud& cloud, double s) {
  PointCloud out = cloud;
  for (Point3& p : out.points) p = p * s;
  return out;
}

}  // namespace

TEST_CASE("chamfer examples") {
  const PointCloud cloud = random_cloud(1, 40);
  CHECK(chamfer_distance(cloud, cloud) == 0.0);

  CHECK(chamfer_distance(single(0, 0, 0), single(3, 4, 0)) == doctest::Approx(50.0));

  PointCloud p1;
  p1.points = {{0, 0, 0}, {2, 0, 0}};
  const PointCloud p2 = single(1, 0, 0);
  // (1 + 1)/2 + 1, by exhaustive nearest neighbors
  CHECK(chamfer_distance(p1, p2) == doctest::Approx(2.0));
  CHECK(chamfer_distance(p1, p2) == doctest::Approx(chamfer_oracle(p1, p2)));

  CHECK_THROWS_AS(chamfer_distance(PointCloud{}, p2), InvalidCloud);
}

TEST_CASE("chamfer equals the exhaustive oracle on random pairs") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed ^ 0xc0ffee);
    const PointCloud a = random_cloud(seed * 2 + 1, 1 + rng.below(8));
    const PointCloud b = random_cloud(seed * 2 + 2, 1 + rng.below(8));
    const double got = chamfer_distance(a, b);
    const double want = chamfer_oracle(a, b);
    CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    CHECK(chamfer_distance(b, a) == got);  // symmetry, exact
  }
}

TEST_CASE("chamfer gradient") {
  const PointCloud cloud = random_cloud(3, 25);
  const auto [g_same1, g_same2] = chamfer_gradient(cloud, cloud);
  for (const Vec3& g : g_same1) CHECK(norm(g) == 0.0);
  for (const Vec3& g : g_same2) CHECK(norm(g) == 0.0);

  const auto [g1, g2] = chamfer_gradient(single(0, 0, 0), single(3, 4, 0));
  CHECK(g1[0].x == doctest::Approx(-12.0));
  CHECK(g1[0].y == doctest::Approx(-16.0));
  CHECK(g1[0].z == doctest::Approx(0.0));
  CHECK(g2[0].x == doctest::Approx(12.0));

  // Finite-difference oracle on tie-free random configurations.
  int tested = 0;
  for (std::uint64_t seed = 100; tested < 10; ++seed) {
    const PointCloud a = random_cloud(seed * 2 + 1, 20);
    const PointCloud b = random_cloud(seed * 2 + 2, 20);
    if (nn_tie_margin(a, b) < 1e-3) continue;
    ++tested;
    const auto [ga, gb] = chamfer_gradient(a, b);
    const Gradient fa =
        finite_difference(a, [&](const PointCloud& x) { return chamfer_distance(x, b); });
    const Gradient fb =
        finite_difference(b, [&](const PointCloud& x) { return chamfer_distance(a, x); });
    CHECK(max_rel_error(ga, fa) <= 1e-4);
    CHECK(max_rel_error(gb, fb) <= 1e-4);
  }
}

TEST_CASE("assignment examples") {
  PointCloud a;
  a.points = {{0, 0, 0}, {1, 0, 0}};

  SUBCASE("identity") {
    const Assignment assignment = emd_assignment(a, a, 1e-9);
    CHECK(assignment.mapping == std::vector<std::size_t>{0, 1});
    CHECK(assignment.total_cost == 0.0);
  }

  SUBCASE("swapped pair") {
    PointCloud b;
    b.points = {{1, 0, 0}, {0, 0, 0}};
    const Assignment assignment = emd_assignment(a, b, 1e-9);
    CHECK(assignment.mapping == std::vector<std::size_t>{1, 0});
    CHECK(assignment.total_cost == 0.0);
  }

  SUBCASE("preconditions") {
    PointCloud c = single(0, 0, 0);
    CHECK_THROWS_AS(emd_assignment(a, c, 1e-9), InvalidArgument);
    CHECK_THROWS_AS(emd_assignment(a, a, 0.0), InvalidArgument);
    CHECK_THROWS_AS(emd_assignment(PointCloud{}, PointCloud{}, 1e-9), InvalidCloud);
  }
}

TEST_CASE("auction matches brute force within 1%") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed ^ 0xbeef);
    const std::size_t n = 2 + rng.below(7);  // up to 8
    const PointCloud a = random_cloud(seed * 31 + 1, n);
    const PointCloud b = random_cloud(seed * 31 + 2, n);
    const double opt = brute_force_emd(a, b);
    const double approx = emd_distance(a, b);
    CHECK(approx >= opt - 1e-12);
    CHECK(approx <= 1.01 * opt);
  }
}

TEST_CASE("emd examples") {
  const PointCloud cloud = random_cloud(9, 30);
  CHECK(emd_distance(cloud, cloud) == 0.0);
  CHECK(emd_distance(single(0, 0, 0), single(3, 4, 0)) == doctest::Approx(5.0));

  const PointCloud a = random_cloud(21, 6);
  const PointCloud b = random_cloud(22, 6);
  CHECK(emd_distance(a, b) <= 1.01 * brute_force_emd(a, b));
}

TEST_CASE("emd gradient") {
  const PointCloud cloud = random_cloud(11, 20);
  Assignment identity;
  identity.mapping.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) identity.mapping[i] = i;
  for (const Vec3& g : emd_gradient(cloud, cloud, identity)) CHECK(norm(g) == 0.0);

  Assignment one;
  one.mapping = {0};
  const Gradient g = emd_gradient(single(0, 0, 0), single(3, 4, 0), one);
  CHECK(g[0].x == doctest::Approx(-0.6));
  CHECK(g[0].y == doctest::Approx(-0.8));

  // Finite differences of the frozen-assignment cost.
  int tested = 0;
  for (std::uint64_t seed = 300; tested < 10; ++seed) {
    const PointCloud a = random_cloud(seed * 7 + 1, 20);
    const PointCloud b = random_cloud(seed * 7 + 2, 20);
    if (nn_tie_margin(a, b) < 1e-3) continue;
    ++tested;
    const Assignment assignment = emd_assignment(a, b, 1e-9);
    const Gradient got = emd_gradient(a, b, assignment);
    const auto frozen_cost = [&](const PointCloud& x) {
      double sum = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        sum += distance(x.points[i], b.points[assignment.mapping[i]]);
      }
      return sum / static_cast<double>(x.size());
    };
    CHECK(max_rel_error(got, finite_difference(a, frozen_cost)) <= 1e-4);
  }

  Assignment bad;
  bad.mapping = {0, 1};
  CHECK_THROWS_AS(emd_gradient(single(0, 0, 0), single(1, 1, 1), bad), InvalidArgument);
}

TEST_CASE("combined loss") {
  const PointCloud y = random_cloud(31, 25);
  const LossBreakdown zero = combined_loss(y, y, y, 1.0);
  CHECK(zero.cd_inter == 0.0);
  CHECK(zero.emd_final == 0.0);
  CHECK(zero.total == 0.0);

  const PointCloud x_inter = random_cloud(32, 25);
  const LossBreakdown no_emd = combined_loss(x_inter, y, y, 0.0);
  CHECK(no_emd.total == no_emd.cd_inter);

  const LossBreakdown fifty = combined_loss(single(0, 0, 0), single(3, 4, 0), single(3, 4, 0), 1.0);
  CHECK(fifty.cd_inter == doctest::Approx(50.0));
  CHECK(fifty.emd_final == 0.0);
  CHECK(fifty.total == doctest::Approx(50.0));

  // total stays bit-exact against its own terms
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const double cd = rng.uniform(0.0, 10.0);
    const double emd = rng.uniform(0.0, 10.0);
    const double alpha = rng.uniform(0.0, 3.0);
    const LossBreakdown b = make_loss_breakdown(cd, emd, alpha);
    CHECK(b.total == cd + alpha * emd);
  }

  CHECK_THROWS_AS(combined_loss(y, random_cloud(33, 24), y, 1.0), InvalidArgument);
}

TEST_CASE("brute force guards") {
  const PointCloud big = random_cloud(41, 10);
  CHECK_THROWS_AS(brute_force_emd(big, big), InvalidArgument);
  const PointCloud a = random_cloud(42, 3);
  CHECK(brute_force_emd(a, a) == 0.0);
}

TEST_CASE("translation and scaling identities") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed ^ 0xabcd);
    const std::size_t n = 2 + rng.below(15);
    const PointCloud a = random_cloud(seed * 13 + 1, n);
    const PointCloud b = random_cloud(seed * 13 + 2, n);
    const Vec3 t{rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0)};
    const double s = rng.uniform(0.3, 5.0);

    const double cd = chamfer_distance(a, b);
    const double cd_t = chamfer_distance(translated(a, t), translated(b, t));
    CHECK(cd_t == doctest::Approx(cd).epsilon(1e-9));
    const double cd_s = chamfer_distance(scaled(a, s), scaled(b, s));
    CHECK(cd_s == doctest::Approx(s * s * cd).epsilon(1e-9));

    const double emd = emd_distance(a, b);
    const double emd_t = emd_distance(translated(a, t), translated(b, t));
    CHECK(emd_t == doctest::Approx(emd).epsilon(1e-9));
    const double emd_s = emd_distance(scaled(a, s), scaled(b, s));
    CHECK(emd_s == doctest::Approx(s * emd).epsilon(1e-9));
  }
}
