#include "roofkit/alpha_shape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "roofkit/errors.hpp"
#include "roofkit/spatial_index.hpp"

namespace roofkit {

namespace {

struct Tri {
  std::array<std::int32_t, 3> v;
  double ccx = 0.0, ccy = 0.0;  // circumcenter
  double rr = 0.0;              // squared circumradius
  bool alive = false;
};

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Circumcircle from coordinates relative to `a` for stability.
void circumcircle(const Vec2& a, const Vec2& b, const Vec2& c, Tri& t) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  if (d == 0.0) {
    t.ccx = a.x;
    t.ccy = a.y;
    t.rr = std::numeric_limits<double>::infinity();
    return;
  }
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  const double ux = (cy * b2 - by * c2) / d;
  const double uy = (bx * c2 - cx * b2) / d;
  t.ccx = a.x + ux;
  t.ccy = a.y + uy;
  t.rr = ux * ux + uy * uy;
}

using Edge = std::pair<std::int32_t, std::int32_t>;

Edge make_edge(std::int32_t u, std::int32_t v) { return u < v ? Edge{u, v} : Edge{v, u}; }

}  // namespace

double median_nn_spacing_2d(const PointCloud& cloud) {
  validate_cloud(cloud, "median_nn_spacing_2d");
  if (cloud.size() < 2) throw InvalidArgument("median_nn_spacing_2d: need at least 2 points");
  PointCloud flat;
  flat.points.reserve(cloud.size());
  for (const Point3& p : cloud.points) flat.points.push_back({p.x, p.y, 0.0});
  const SpatialIndex index(flat);
  std::vector<double> nn(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const auto two = index.k_nearest(flat.points[i], 2);
    nn[i] = two.size() > 1 ? two[1].distance : 0.0;
  }
  std::sort(nn.begin(), nn.end());
  const std::size_t n = nn.size();
  return n % 2 == 1 ? nn[n / 2] : 0.5 * (nn[n / 2 - 1] + nn[n / 2]);
}

AlphaShape outline_2d(const PointCloud& cloud, std::optional<double> alpha) {
  validate_cloud(cloud, "outline_2d");

  // Drop z, drop exact duplicates (resampled clouds carry jittered twins that
  // stay distinct; exact twins would break the incremental triangulation).
  std::vector<Vec2> pts;
  pts.reserve(cloud.size());
  {
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Point3& pa = cloud.points[a];
      const Point3& pb = cloud.points[b];
      if (pa.x != pb.x) return pa.x < pb.x;
      if (pa.y != pb.y) return pa.y < pb.y;
      return a < b;
    });
    std::vector<char> keep(cloud.size(), 1);
    for (std::size_t i = 1; i < order.size(); ++i) {
      const Point3& prev = cloud.points[order[i - 1]];
      const Point3& cur = cloud.points[order[i]];
      if (prev.x == cur.x && prev.y == cur.y) keep[order[i]] = 0;
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (keep[i]) pts.push_back({cloud.points[i].x, cloud.points[i].y});
    }
  }
  if (pts.size() < 3) throw InvalidArgument("outline_2d: fewer than 3 distinct xy points");

  double alpha_value;
  if (alpha) {
    alpha_value = *alpha;
    if (!(alpha_value > 0.0)) throw InvalidArgument("outline_2d: alpha must be positive");
  } else {
    const double spacing = median_nn_spacing_2d(cloud);
    if (!(spacing > 0.0)) throw InvalidArgument("outline_2d: degenerate point spacing");
    alpha_value = 1.0 / (2.0 * spacing);
  }
  const double keep_rr = 1.0 / (alpha_value * alpha_value);

  // Super-triangle generously containing everything.
  Vec2 lo = pts[0], hi = pts[0];
  for (const Vec2& p : pts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double span = std::max({hi.x - lo.x, hi.y - lo.y, 1.0});
  const Vec2 mid{(lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0};
  const std::int32_t n = static_cast<std::int32_t>(pts.size());
  pts.push_back({mid.x - 32.0 * span, mid.y - 16.0 * span});
  pts.push_back({mid.x + 32.0 * span, mid.y - 16.0 * span});
  pts.push_back({mid.x, mid.y + 32.0 * span});

  std::vector<Tri> tris;
  {
    Tri super{{n, n + 1, n + 2}};
    circumcircle(pts[n], pts[n + 1], pts[n + 2], super);
    super.alive = true;
    tris.push_back(super);
  }

  std::vector<std::size_t> bad;
  std::map<Edge, int> edge_count;
  for (std::int32_t pi = 0; pi < n; ++pi) {
    const Vec2& p = pts[pi];
    bad.clear();
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (!tris[t].alive) continue;
      const double dx = p.x - tris[t].ccx;
      const double dy = p.y - tris[t].ccy;
      if (dx * dx + dy * dy < tris[t].rr) bad.push_back(t);
    }

    edge_count.clear();
    for (std::size_t t : bad) {
      const auto& v = tris[t].v;
      ++edge_count[make_edge(v[0], v[1])];
      ++edge_count[make_edge(v[1], v[2])];
      ++edge_count[make_edge(v[2], v[0])];
      tris[t].alive = false;
    }
    for (const auto& [edge, count] : edge_count) {
      if (count != 1) continue;
      Tri t{{edge.first, edge.second, pi}};
      if (orient(pts[edge.first], pts[edge.second], p) == 0.0) continue;  // degenerate sliver
      circumcircle(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], t);
      t.alive = true;
      tris.push_back(t);
    }
  }

  AlphaShape shape;
  std::map<Edge, int> boundary_count;
  for (const Tri& t : tris) {
    if (!t.alive) continue;
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;  // touches the super-triangle
    if (t.rr > keep_rr) continue;
    ++shape.triangle_count;
    shape.area += std::abs(orient(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]])) / 2.0;
    ++boundary_count[make_edge(t.v[0], t.v[1])];
    ++boundary_count[make_edge(t.v[1], t.v[2])];
    ++boundary_count[make_edge(t.v[2], t.v[0])];
  }
  if (shape.triangle_count == 0) {
    throw InvalidArgument(
        "outline_2d: no triangle passed the alpha filter (alpha too large or cloud degenerate)");
  }

  // Boundary edges (used by exactly one kept triangle) chained into loops.
  std::map<std::int32_t, std::vector<std::int32_t>> adjacency;
  std::map<Edge, int> unused;
  for (const auto& [edge, count] : boundary_count) {
    if (count != 1) continue;
    adjacency[edge.first].push_back(edge.second);
    adjacency[edge.second].push_back(edge.first);
    unused[edge] = 1;
  }
  for (auto& [vertex, list] : adjacency) std::sort(list.begin(), list.end());

  for (auto& [edge, live] : unused) {
    if (!live) continue;
    Ring ring;
    std::int32_t start = edge.first;
    std::int32_t current = start;
    std::int32_t next = edge.second;
    unused[edge] = 0;
    ring.push_back(pts[current]);
    while (next != start) {
      ring.push_back(pts[next]);
      const auto& candidates = adjacency[next];
      std::int32_t chosen = -1;
      for (std::int32_t c : candidates) {
        auto it = unused.find(make_edge(next, c));
        if (it != unused.end() && it->second) {
          chosen = c;
          break;
        }
      }
      if (chosen < 0) break;  // open chain; only possible on numeric degeneracy
      unused[make_edge(next, chosen)] = 0;
      current = next;
      next = chosen;
    }
    shape.rings.push_back(std::move(ring));
  }
  return shape;
}

}  // namespace roofkit
