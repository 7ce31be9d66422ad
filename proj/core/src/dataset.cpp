#include "roofkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "roofkit/cloud_io.hpp"
#include "roofkit/errors.hpp"
#include "roofkit/rng.hpp"

namespace roofkit {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

// One planar facet: z = ax + by + c over an xy polygon.
struct Facet {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  Ring region;
};

PlaneModel facet_plane(const Facet& f) {
  const double len = std::sqrt(f.a * f.a + f.b * f.b + 1.0);
  return canonicalize({{-f.a / len, -f.b / len, 1.0 / len}, -f.c / len});
}

void check_spec(const RoofSpec& spec) {
  if (!(spec.width > 0.0) || !(spec.depth > 0.0)) {
    throw InvalidArgument("generate_roof: footprint dimensions must be positive");
  }
  if (spec.pitch_deg < 0.0 || spec.pitch_deg >= 90.0) {
    throw InvalidArgument("generate_roof: pitch must be in [0, 90) degrees");
  }
  if (!(spec.density > 0.0)) throw InvalidArgument("generate_roof: density must be positive");
  if (spec.noise_sigma < 0.0) throw InvalidArgument("generate_roof: noise_sigma must be >= 0");
  if (spec.max_points == 0) throw InvalidArgument("generate_roof: max_points must be >= 1");
}

std::vector<Facet> build_facets(const RoofSpec& spec, Ring& outline) {
  const double w = spec.width;
  const double d = spec.depth;
  const double hw = w / 2.0;
  const double hd = d / 2.0;
  const double base = spec.base_height;
  const double slope = std::tan(spec.pitch_deg * kDegToRad);

  std::vector<Facet> facets;
  switch (spec.kind) {
    case RoofKind::Flat: {
      outline = {{-hw, -hd}, {hw, -hd}, {hw, hd}, {-hw, hd}};
      facets.push_back({0.0, 0.0, base, outline});
      break;
    }
    case RoofKind::Gable: {
      // Ridge along x at y = 0, eaves at |y| = depth/2.
      outline = {{-hw, -hd}, {hw, -hd}, {hw, hd}, {-hw, hd}};
      facets.push_back({0.0, slope, base + slope * hd, {{-hw, -hd}, {hw, -hd}, {hw, 0}, {-hw, 0}}});
      facets.push_back({0.0, -slope, base + slope * hd, {{-hw, 0}, {hw, 0}, {hw, hd}, {-hw, hd}}});
      break;
    }
    case RoofKind::Hip: {
      // Four facets of equal pitch; ridge runs along the longer axis.
      outline = {{-hw, -hd}, {hw, -hd}, {hw, hd}, {-hw, hd}};
      const bool wide = w >= d;
      const double re = wide ? (w - d) / 2.0 : (d - w) / 2.0;  // ridge end coordinate
      if (wide) {
        facets.push_back(
            {0.0, slope, base + slope * hd, {{-hw, -hd}, {hw, -hd}, {re, 0}, {-re, 0}}});
        facets.push_back(
            {0.0, -slope, base + slope * hd, {{-re, 0}, {re, 0}, {hw, hd}, {-hw, hd}}});
        facets.push_back({slope, 0.0, base + slope * hw, {{-hw, -hd}, {-re, 0}, {-hw, hd}}});
        facets.push_back({-slope, 0.0, base + slope * hw, {{hw, -hd}, {hw, hd}, {re, 0}}});
      } else {
        facets.push_back({slope, 0.0, base + slope * hw, {{-hw, -hd}, {0, -re}, {0, re}, {-hw, hd}}});
        facets.push_back({-slope, 0.0, base + slope * hw, {{hw, -hd}, {hw, hd}, {0, re}, {0, -re}}});
        facets.push_back({0.0, slope, base + slope * hd, {{-hw, -hd}, {hw, -hd}, {0, -re}}});
        facets.push_back({0.0, -slope, base + slope * hd, {{0, re}, {hw, hd}, {-hw, hd}}});
      }
      break;
    }
    case RoofKind::LComposite: {
      // Gabled main rectangle plus a flat wing off the north-east corner.
      const double wd = d / 2.0;  // wing depth
      outline = {{-hw, -hd}, {hw, -hd}, {hw, hd + wd}, {0, hd + wd}, {0, hd}, {-hw, hd}};
      facets.push_back({0.0, slope, base + slope * hd, {{-hw, -hd}, {hw, -hd}, {hw, 0}, {-hw, 0}}});
      facets.push_back({0.0, -slope, base + slope * hd, {{-hw, 0}, {hw, 0}, {hw, hd}, {-hw, hd}}});
      facets.push_back({0.0, 0.0, base, {{0, hd}, {hw, hd}, {hw, hd + wd}, {0, hd + wd}}});
      break;
    }
  }
  return facets;
}

}  // namespace

RoofKind roof_kind_from_string(const std::string& name) {
  if (name == "flat") return RoofKind::Flat;
  if (name == "gable") return RoofKind::Gable;
  if (name == "hip") return RoofKind::Hip;
  if (name == "lcomposite" || name == "l") return RoofKind::LComposite;
  throw InvalidArgument("unknown roof kind '" + name + "' (flat|gable|hip|lcomposite)");
}

std::string to_string(RoofKind kind) {
  switch (kind) {
    case RoofKind::Flat: return "flat";
    case RoofKind::Gable: return "gable";
    case RoofKind::Hip: return "hip";
    case RoofKind::LComposite: return "lcomposite";
  }
  return "?";
}

GroundTruthRoof generate_roof(const RoofSpec& spec) {
  check_spec(spec);
  GroundTruthRoof roof;
  std::vector<Facet> facets = build_facets(spec, roof.outline);

  Rng rng(derive_seed(spec.seed, "roofgen"));
  for (std::size_t fi = 0; fi < facets.size(); ++fi) {
    const Facet& facet = facets[fi];
    roof.facet_models.push_back(facet_plane(facet));

    // Grid spacing chosen so the on-facet (not projected) density matches.
    const double cos_slope = 1.0 / std::sqrt(1.0 + facet.a * facet.a + facet.b * facet.b);
    const double h = std::sqrt(cos_slope / spec.density);
    const Bounds2 bb = ring_bounds(facet.region);
    const std::size_t cols = static_cast<std::size_t>(std::ceil((bb.max.x - bb.min.x) / h));
    const std::size_t rows = static_cast<std::size_t>(std::ceil((bb.max.y - bb.min.y) / h));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double u = rng.uniform();
        const double v = rng.uniform();
        // z-noise clamped to +-4 sigma so every point provably satisfies its
        // facet plane within 4 sigma.
        const double noise =
            spec.noise_sigma > 0.0
                ? std::clamp(rng.gaussian(0.0, spec.noise_sigma), -4.0 * spec.noise_sigma,
                             4.0 * spec.noise_sigma)
                : 0.0;
        const Vec2 p{bb.min.x + (static_cast<double>(c) + u) * h,
                     bb.min.y + (static_cast<double>(r) + v) * h};
        if (!point_in_ring(facet.region, p)) continue;
        const double z = facet.a * p.x + facet.b * p.y + facet.c + noise;
        roof.cloud.points.push_back({p.x, p.y, z});
        roof.facet_labels.push_back(static_cast<int>(fi));
      }
    }
  }

  if (roof.cloud.empty()) {
    throw InvalidArgument("generate_roof: spec produced no points (density too low?)");
  }

  if (roof.cloud.size() > spec.max_points) {
    // Seeded uniform thinning down to the cap, order preserved.
    Rng cap_rng(derive_seed(spec.seed, "gencap"));
    std::vector<std::size_t> idx(roof.cloud.size());
    std::iota(idx.begin(), idx.end(), 0);
    cap_rng.shuffle(idx);
    idx.resize(spec.max_points);
    std::sort(idx.begin(), idx.end());
    PointCloud thinned;
    std::vector<int> labels;
    thinned.points.reserve(idx.size());
    labels.reserve(idx.size());
    for (std::size_t i : idx) {
      thinned.points.push_back(roof.cloud.points[i]);
      labels.push_back(roof.facet_labels[i]);
    }
    roof.cloud = std::move(thinned);
    roof.facet_labels = std::move(labels);
  }

  roof.cloud.labels = std::vector<Label>(roof.cloud.size(), Label::Roof);
  return roof;
}

double median_z(const PointCloud& cloud) {
  validate_cloud(cloud, "median_z");
  std::vector<double> z;
  z.reserve(cloud.size());
  for (const Point3& p : cloud.points) z.push_back(p.z);
  std::sort(z.begin(), z.end());
  const std::size_t n = z.size();
  return n % 2 == 1 ? z[n / 2] : 0.5 * (z[n / 2 - 1] + z[n / 2]);
}

PointCloud add_padding(const PointCloud& roof, const Ring& outline, const PadConfig& cfg,
                       std::uint64_t seed) {
  validate_cloud(roof, "add_padding");
  if (!(cfg.ring_width > 0.0) || !(cfg.margin > 0.0)) {
    throw InvalidArgument("add_padding: ring_width and margin must be positive");
  }
  if (outline.size() < 3 || ring_area(outline) <= 0.0) {
    throw InvalidArgument("add_padding: degenerate outline");
  }

  const double area = ring_area(outline);
  const double density = cfg.density.value_or(static_cast<double>(roof.size()) / area);
  if (!(density > 0.0)) throw InvalidArgument("add_padding: pad density must be positive");
  const double pad_z = median_z(roof) - cfg.margin;
  const double h = std::sqrt(1.0 / density);

  Bounds2 bb = ring_bounds(outline);
  bb.min.x -= cfg.ring_width;
  bb.min.y -= cfg.ring_width;
  bb.max.x += cfg.ring_width;
  bb.max.y += cfg.ring_width;

  PointCloud out;
  out.points = roof.points;
  out.labels = std::vector<Label>(roof.size(), Label::Roof);

  Rng rng(derive_seed(seed, "padding"));
  const std::size_t cols = static_cast<std::size_t>(std::ceil((bb.max.x - bb.min.x) / h));
  const std::size_t rows = static_cast<std::size_t>(std::ceil((bb.max.y - bb.min.y) / h));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double u = rng.uniform();
      const double v = rng.uniform();
      const Vec2 p{bb.min.x + (static_cast<double>(c) + u) * h,
                   bb.min.y + (static_cast<double>(r) + v) * h};
      if (point_in_ring(outline, p)) continue;
      if (chebyshev_distance_to_ring(outline, p) > cfg.ring_width) continue;
      out.points.push_back({p.x, p.y, pad_z});
      out.labels->push_back(Label::Pad);
    }
  }
  return out;
}

PointCloud remove_padding(const PointCloud& cloud, PadRemoval mode, double margin) {
  validate_cloud(cloud, "remove_padding");
  PointCloud out;
  if (mode == PadRemoval::Labels) {
    if (!cloud.has_labels()) {
      throw InvalidArgument("remove_padding: Labels mode requires a labeled cloud");
    }
    out.labels.emplace();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if ((*cloud.labels)[i] == Label::Roof) {
        out.points.push_back(cloud.points[i]);
        out.labels->push_back(Label::Roof);
      }
    }
    return out;
  }
  if (!(margin > 0.0)) throw InvalidArgument("remove_padding: margin must be positive");
  const double threshold = median_z(cloud) - margin / 2.0;
  if (cloud.has_labels()) out.labels.emplace();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.points[i].z < threshold) continue;
    out.points.push_back(cloud.points[i]);
    if (out.labels) out.labels->push_back((*cloud.labels)[i]);
  }
  return out;
}

PointCloud resample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  validate_cloud(cloud, "resample");
  if (n == 0) throw InvalidArgument("resample: n must be >= 1");
  if (n == cloud.size()) return cloud;

  Rng rng(derive_seed(seed, "resample"));
  PointCloud out;
  if (cloud.has_labels()) out.labels.emplace();

  if (n < cloud.size()) {
    std::vector<std::size_t> idx(cloud.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) {
      out.points.push_back(cloud.points[i]);
      if (out.labels) out.labels->push_back((*cloud.labels)[i]);
    }
    return out;
  }

  out.points = cloud.points;
  if (out.labels) *out.labels = *cloud.labels;
  constexpr double kJitter = 1e-6;
  for (std::size_t extra = cloud.size(); extra < n; ++extra) {
    const std::size_t i = static_cast<std::size_t>(rng.below(cloud.size()));
    Point3 p = cloud.points[i];
    p.x += rng.uniform(-kJitter, kJitter);
    p.y += rng.uniform(-kJitter, kJitter);
    p.z += rng.uniform(-kJitter, kJitter);
    out.points.push_back(p);
    if (out.labels) out.labels->push_back((*cloud.labels)[i]);
  }
  return out;
}

std::vector<RoofSpec> parse_roof_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec file " + path.string());
  std::vector<RoofSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);

    std::vector<std::pair<std::string, std::string>> kv;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) {
        const std::string token = line.substr(i, j - i);
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
          throw IoError(path.string() + ":" + std::to_string(line_no) + " (entry " +
                        std::to_string(specs.size() + 1) + "): expected key=value, got '" +
                        token + "'");
        }
        kv.emplace_back(token.substr(0, eq), token.substr(eq + 1));
      }
      i = j;
    }
    if (kv.empty()) continue;

    RoofSpec spec;
    for (const auto& [key, value] : kv) {
      try {
        if (key == "kind") spec.kind = roof_kind_from_string(value);
        else if (key == "width") spec.width = std::stod(value);
        else if (key == "depth") spec.depth = std::stod(value);
        else if (key == "pitch") spec.pitch_deg = std::stod(value);
        else if (key == "base") spec.base_height = std::stod(value);
        else if (key == "density") spec.density = std::stod(value);
        else if (key == "sigma") spec.noise_sigma = std::stod(value);
        else if (key == "seed") spec.seed = std::stoull(value);
        else if (key == "max_points") spec.max_points = std::stoull(value);
        else {
          throw InvalidArgument("unknown key '" + key + "'");
        }
      } catch (const std::exception& e) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + " (entry " +
                      std::to_string(specs.size() + 1) + "): " + e.what());
      }
    }
    specs.push_back(spec);
  }
  if (specs.empty()) throw IoError(path.string() + ": no roof specs found");
  return specs;
}

void save_ground_truth(const GroundTruthRoof& roof, const std::filesystem::path& ply_path,
                       const std::filesystem::path& sidecar_path) {
  save_point_cloud(roof.cloud, ply_path, CloudFormat::PlyAscii);
  nlohmann::json j;
  j["id"] = roof.id;
  j["facet_labels"] = roof.facet_labels;
  j["facet_models"] = nlohmann::json::array();
  for (const PlaneModel& m : roof.facet_models) {
    j["facet_models"].push_back(
        {{"normal", {m.normal.x, m.normal.y, m.normal.z}}, {"offset", m.offset}});
  }
  j["outline"] = nlohmann::json::array();
  for (const Vec2& v : roof.outline) j["outline"].push_back({v.x, v.y});

  std::ofstream out(sidecar_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + sidecar_path.string());
  out << j.dump(2) << "\n";
}

GroundTruthRoof load_ground_truth(const std::filesystem::path& ply_path,
                                  const std::filesystem::path& sidecar_path) {
  GroundTruthRoof roof;
  roof.cloud = load_point_cloud(ply_path, CloudFormat::PlyAscii);

  std::ifstream in(sidecar_path);
  if (!in) throw IoError("cannot open sidecar " + sidecar_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(sidecar_path.string() + ": " + e.what());
  }
  roof.id = j.value("id", std::string{});
  roof.facet_labels = j.at("facet_labels").get<std::vector<int>>();
  if (roof.facet_labels.size() != roof.cloud.size()) {
    throw IoError(sidecar_path.string() + ": facet label count does not match the cloud");
  }
  for (const auto& m : j.at("facet_models")) {
    PlaneModel model;
    model.normal = {m.at("normal")[0], m.at("normal")[1], m.at("normal")[2]};
    model.offset = m.at("offset");
    roof.facet_models.push_back(model);
  }
  for (const auto& v : j.at("outline")) {
    roof.outline.push_back({v[0], v[1]});
  }
  return roof;
}

}  // namespace roofkit
