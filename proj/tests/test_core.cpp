#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "roofkit/cloud_io.hpp"
#include "roofkit/errors.hpp"
#include "roofkit/spatial_index.hpp"
#include "test_support.hpp"

using namespace roofkit;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "roofkit_core_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

}  // namespace

TEST_CASE("xyz loading") {
  const fs::path p = temp_file("three.xyz");
  write_text(p, "0 0 0\n1 0 0\n0 1 0\n");
  const PointCloud cloud = load_point_cloud(p, CloudFormat::Xyz);
  REQUIRE(cloud.size() == 3);
  CHECK(cloud.points[1] == Point3{1, 0, 0});
  CHECK(cloud.points[2] == Point3{0, 1, 0});
  CHECK_FALSE(cloud.has_labels());

  SUBCASE("label column") {
    write_text(p, "0 0 0 0\n1 0 0 1\n");
    const PointCloud labeled = load_point_cloud(p, CloudFormat::Xyz);
    REQUIRE(labeled.has_labels());
    CHECK((*labeled.labels)[0] == Label::Roof);
    CHECK((*labeled.labels)[1] == Label::Pad);
  }

  SUBCASE("malformed line reports the line number") {
    write_text(p, "0 0 0\n1 2\n");
    CHECK_THROWS_WITH_AS(load_point_cloud(p, CloudFormat::Xyz),
                         doctest::Contains(":2"), IoError);
  }

  SUBCASE("empty file") {
    write_text(p, "\n\n");
    CHECK_THROWS_AS(load_point_cloud(p, CloudFormat::Xyz), IoError);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_point_cloud(temp_file("nope.xyz"), CloudFormat::Xyz), IoError);
  }
}

TEST_CASE("ply loading") {
  const fs::path p = temp_file("two.ply");
  write_text(p,
             "ply\nformat ascii 1.0\ncomment anything\nelement vertex 2\n"
             "property double x\nproperty double y\nproperty double z\n"
             "end_header\n0 0 0\n1.5 2 3\n");
  const PointCloud cloud = load_point_cloud(p, CloudFormat::PlyAscii);
  REQUIRE(cloud.size() == 2);
  CHECK(cloud.points[1] == Point3{1.5, 2, 3});

  SUBCASE("binary ply rejected") {
    write_text(p, "ply\nformat binary_little_endian 1.0\nelement vertex 1\nend_header\n");
    CHECK_THROWS_WITH_AS(load_point_cloud(p, CloudFormat::PlyAscii),
                         doctest::Contains("ascii"), IoError);
  }

  SUBCASE("truncated body names the vertex count") {
    write_text(p,
               "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\n"
               "property double y\nproperty double z\nend_header\n0 0 0\n");
    CHECK_THROWS_AS(load_point_cloud(p, CloudFormat::PlyAscii), IoError);
  }
}

TEST_CASE("round trips are exact") {
  const fs::path dir = fs::temp_directory_path() / "roofkit_core_tests";
  fs::create_directories(dir);

  PointCloud cloud = testsupport::random_cloud(42, 100, -25.0, 25.0);
  SUBCASE("xyz") {
    const fs::path p = dir / "rt.xyz";
    save_point_cloud(cloud, p, CloudFormat::Xyz);
    const PointCloud back = load_point_cloud(p, CloudFormat::Xyz);
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(back.points[i] == cloud.points[i]);
  }
  SUBCASE("ply with labels") {
    cloud.labels = std::vector<Label>(cloud.size(), Label::Roof);
    (*cloud.labels)[7] = Label::Pad;
    const fs::path p = dir / "rt.ply";
    save_point_cloud(cloud, p, CloudFormat::PlyAscii);
    const PointCloud back = load_point_cloud(p, CloudFormat::PlyAscii);
    REQUIRE(back.size() == cloud.size());
    REQUIRE(back.has_labels());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK(back.points[i] == cloud.points[i]);
      CHECK((*back.labels)[i] == (*cloud.labels)[i]);
    }
  }
  SUBCASE("unwritable path") {
    CHECK_THROWS_AS(save_point_cloud(cloud, "/no/such/dir/x.xyz", CloudFormat::Xyz), IoError);
  }
}

TEST_CASE("bounding box") {
  PointCloud cloud;
  cloud.points = {{0, 0, 0}, {1, 2, 3}};
  const BoundingBox box = bounding_box(cloud);
  CHECK(box.min == Point3{0, 0, 0});
  CHECK(box.max == Point3{1, 2, 3});

  PointCloud single;
  single.points = {{4, 5, 6}};
  const BoundingBox sbox = bounding_box(single);
  CHECK(sbox.min == sbox.max);

  const PointCloud uniform = testsupport::random_cloud(7, 1000);
  const BoundingBox ubox = bounding_box(uniform);
  CHECK(ubox.min.x >= 0.0);
  CHECK(ubox.max.z <= 1.0);
  for (const Point3& p : uniform.points) CHECK(ubox.contains(p));

  CHECK_THROWS_AS(bounding_box(PointCloud{}), InvalidCloud);
}

TEST_CASE("spatial index basics") {
  PointCloud grid;
  grid.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const SpatialIndex index(grid);

  const Neighbor n = index.nearest({0, 0, 0});
  CHECK(n.index == 0);
  CHECK(n.distance == 0.0);

  PointCloud pair;
  pair.points = {{0, 0, 0}, {1, 0, 0}};
  const SpatialIndex pair_index(pair);
  CHECK(pair_index.nearest({0.4, 0, 0}).index == 0);

  const auto in_radius = pair_index.radius_search({0, 0, 0}, 1.5);
  CHECK(in_radius == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS(SpatialIndex(PointCloud{}), InvalidCloud);
}

TEST_CASE("index queries equal exhaustive search, ties included") {
  // Integer lattice coordinates force plenty of exact distance ties.
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    PointCloud cloud;
    const std::size_t n = 1 + rng.below(300);
    for (std::size_t i = 0; i < n; ++i) {
      cloud.points.push_back({static_cast<double>(rng.below(5)),
                              static_cast<double>(rng.below(5)),
                              static_cast<double>(rng.below(5))});
    }
    const SpatialIndex index(cloud);
    for (int q = 0; q < 10; ++q) {
      const Point3 query{static_cast<double>(rng.below(6)), static_cast<double>(rng.below(6)),
                         rng.uniform()};
      for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{17}, n}) {
        const auto got = index.k_nearest(query, k);
        const auto want = testsupport::knn_oracle(cloud, query, k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
          CHECK(got[i].index == want[i].second);
          CHECK(got[i].distance * got[i].distance == doctest::Approx(want[i].first).epsilon(1e-12));
        }
      }
      const double r = rng.uniform(0.0, 3.0);
      const auto got_r = index.radius_search(query, r);
      std::vector<std::size_t> want_r;
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (squared_distance(query, cloud.points[i]) <= r * r) want_r.push_back(i);
      }
      CHECK(got_r == want_r);
    }
  }
}
