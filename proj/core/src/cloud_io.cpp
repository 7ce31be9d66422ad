#include "roofkit/cloud_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "roofkit/errors.hpp"

namespace roofkit {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw IoError(where(path, line) + ": not a number: '" + std::string(tok) + "'");
  }
  return v;
}

Label parse_label(std::string_view tok, const std::filesystem::path& path, std::size_t line) {
  if (tok == "0") return Label::Roof;
  if (tok == "1") return Label::Pad;
  throw IoError(where(path, line) + ": label must be 0 (roof) or 1 (pad), got '" +
                std::string(tok) + "'");
}

PointCloud load_xyz(std::istream& in, const std::filesystem::path& path) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  int arity = 0;  // 3 or 4, fixed by the first data line
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 3 && tokens.size() != 4) {
      throw IoError(where(path, line_no) + ": expected 3 or 4 fields, got " +
                    std::to_string(tokens.size()));
    }
    if (arity == 0) {
      arity = static_cast<int>(tokens.size());
      if (arity == 4) cloud.labels.emplace();
    } else if (static_cast<int>(tokens.size()) != arity) {
      throw IoError(where(path, line_no) + ": inconsistent field count (" +
                    std::to_string(tokens.size()) + " vs " + std::to_string(arity) + " before)");
    }
    Point3 p{parse_double(tokens[0], path, line_no), parse_double(tokens[1], path, line_no),
             parse_double(tokens[2], path, line_no)};
    cloud.points.push_back(p);
    if (arity == 4) cloud.labels->push_back(parse_label(tokens[3], path, line_no));
  }
  if (cloud.empty()) throw IoError(path.string() + ": no points in file");
  return cloud;
}

PointCloud load_ply(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") {
    throw IoError(where(path, line_no) + ": missing 'ply' magic");
  }

  std::size_t vertex_count = 0;
  bool saw_vertex_element = false;
  bool in_vertex_element = false;
  bool has_label = false;
  std::vector<std::string> coord_props;

  while (true) {
    if (!next_line()) throw IoError(path.string() + ": truncated header (no end_header)");
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2 || tokens[1] != "ascii") {
        throw IoError(where(path, line_no) + ": only ascii PLY is supported, got '" + line + "'");
      }
      continue;
    }
    if (tokens[0] == "element") {
      if (tokens.size() != 3) throw IoError(where(path, line_no) + ": malformed element line");
      if (tokens[1] == "vertex") {
        unsigned long long n = 0;
        const auto tok = tokens[2];
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), n);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
          throw IoError(where(path, line_no) + ": bad vertex count '" + std::string(tok) + "'");
        }
        vertex_count = static_cast<std::size_t>(n);
        saw_vertex_element = true;
        in_vertex_element = true;
      } else {
        throw IoError(where(path, line_no) + ": unsupported element '" + std::string(tokens[1]) +
                      "' (only vertex clouds are handled)");
      }
      continue;
    }
    if (tokens[0] == "property") {
      if (!in_vertex_element) {
        throw IoError(where(path, line_no) + ": property outside vertex element");
      }
      if (tokens.size() != 3) throw IoError(where(path, line_no) + ": malformed property line");
      const std::string name(tokens[2]);
      if (name == "x" || name == "y" || name == "z") {
        coord_props.push_back(name);
      } else if (name == "label") {
        has_label = true;
      } else {
        throw IoError(where(path, line_no) + ": unsupported vertex property '" + name + "'");
      }
      continue;
    }
    if (tokens[0] == "end_header") break;
    throw IoError(where(path, line_no) + ": unexpected header line '" + line + "'");
  }

  if (!saw_vertex_element) throw IoError(path.string() + ": header has no vertex element");
  if (coord_props != std::vector<std::string>{"x", "y", "z"}) {
    throw IoError(path.string() + ": vertex properties must be x, y, z in order");
  }
  if (vertex_count == 0) throw IoError(path.string() + ": empty vertex element");

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  if (has_label) cloud.labels.emplace();
  const std::size_t expected = has_label ? 4 : 3;
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!next_line()) {
      throw IoError(path.string() + ": expected " + std::to_string(vertex_count) +
                    " vertices, file ended after " + std::to_string(i));
    }
    const auto tokens = split_ws(line);
    if (tokens.size() != expected) {
      throw IoError(where(path, line_no) + ": expected " + std::to_string(expected) +
                    " fields, got " + std::to_string(tokens.size()));
    }
    cloud.points.push_back({parse_double(tokens[0], path, line_no),
                            parse_double(tokens[1], path, line_no),
                            parse_double(tokens[2], path, line_no)});
    if (has_label) cloud.labels->push_back(parse_label(tokens[3], path, line_no));
  }
  return cloud;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CloudFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::Xyz;
  if (ext == ".ply") return CloudFormat::PlyAscii;
  throw InvalidArgument("cannot infer cloud format from extension '" + ext + "' (" +
                        path.string() + ")");
}

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PointCloud cloud =
      format == CloudFormat::Xyz ? load_xyz(in, path) : load_ply(in, path);
  validate_cloud(cloud, "load_point_cloud");
  return cloud;
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      CloudFormat format) {
  validate_cloud(cloud, "save_point_cloud");
  std::ostringstream out;
  const bool labeled = cloud.has_labels();
  if (format == CloudFormat::PlyAscii) {
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << cloud.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (labeled) out << "property uchar label\n";
    out << "end_header\n";
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z);
    if (labeled) out << ' ' << (cloud.labels->at(i) == Label::Pad ? '1' : '0');
    out << '\n';
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << out.str();
  if (!file.flush()) throw IoError("write failed for " + path.string());
}

}  // namespace roofkit
