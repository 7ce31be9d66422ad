#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "roofkit/errors.hpp"

namespace roofkit::cli {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 30.0;
constexpr double kMarginBottom = 55.0;

struct Axis {
  double lo = 0.0, hi = 1.0;
  double px0 = 0.0, px1 = 1.0;
  double map(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) hi = lo + 1.0;
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" "
         "text-anchor=\"middle\">"
      << title << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Axis& x, const Axis& y, const std::string& xlabel,
               const std::string& ylabel) {
  out << "<g stroke=\"black\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << x.px0 << "\" y1=\"" << y.px0 << "\" x2=\"" << x.px1 << "\" y2=\""
      << y.px0 << "\"/>\n";
  out << "<line x1=\"" << x.px0 << "\" y1=\"" << y.px0 << "\" x2=\"" << x.px0 << "\" y2=\""
      << y.px1 << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (double t : nice_ticks(x.lo, x.hi)) {
    const double px = x.map(t);
    out << "<line x1=\"" << px << "\" y1=\"" << y.px0 << "\" x2=\"" << px << "\" y2=\""
        << y.px0 + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << y.px0 + 16 << "\" text-anchor=\"middle\">" << num(t)
        << "</text>\n";
  }
  for (double t : nice_ticks(y.lo, y.hi)) {
    const double py = y.map(t);
    out << "<line x1=\"" << x.px0 - 4 << "\" y1=\"" << py << "\" x2=\"" << x.px0 << "\" y2=\""
        << py << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << x.px0 - 7 << "\" y=\"" << py + 3 << "\" text-anchor=\"end\">" << num(t)
        << "</text>\n";
  }
  out << "<text x=\"" << (x.px0 + x.px1) / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
  out << "<text x=\"16\" y=\"" << (y.px0 + y.px1) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (y.px0 + y.px1) / 2 << ")\">" << ylabel << "</text>\n";
  out << "</g>\n";
}

void polyline(std::ostringstream& out, const std::vector<std::pair<double, double>>& pts,
              const Axis& x, const Axis& y, const std::string& color) {
  if (pts.empty()) return;
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (const auto& [px, py] : pts) out << num(x.map(px)) << ',' << num(y.map(py)) << ' ';
  out << "\"/>\n";
}

// Height colormap, dark blue to red through green.
std::string height_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double stops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  const double pos = t * 4.0;
  const int k = std::min(3, static_cast<int>(pos));
  const double f = pos - k;
  char buf[32];
  std::snprintf(buf, sizeof buf, "rgb(%d,%d,%d)",
                static_cast<int>(stops[k][0] + f * (stops[k + 1][0] - stops[k][0])),
                static_cast<int>(stops[k][1] + f * (stops[k + 1][1] - stops[k][1])),
                static_cast<int>(stops[k][2] + f * (stops[k + 1][2] - stops[k][2])));
  return buf;
}

}  // namespace

std::string svg_loss_curves(const std::vector<HistoryEntry>& history) {
  if (history.empty()) throw InvalidArgument("svg_loss_curves: empty history");
  std::vector<std::pair<double, double>> cd, emd, total;
  double max_y = 0.0, max_x = 0.0;
  for (const HistoryEntry& e : history) {
    const double it = static_cast<double>(e.iteration);
    max_x = std::max(max_x, it);
    cd.push_back({it, e.loss.cd_inter});
    if (e.stage != 1) emd.push_back({it, e.loss.emd_final});
    total.push_back({it, e.loss.total});
    max_y = std::max({max_y, e.loss.total, e.loss.cd_inter});
  }
  Axis x{0.0, std::max(max_x, 1.0), kMarginLeft, kWidth - kMarginRight};
  Axis y{0.0, max_y * 1.05 + 1e-12, kHeight - kMarginBottom, kMarginTop};

  std::ostringstream out;
  open_svg(out, "loss history");
  draw_axes(out, x, y, "iteration", "loss");
  polyline(out, cd, x, y, "#1f77b4");
  polyline(out, emd, x, y, "#2ca02c");
  polyline(out, total, x, y, "#d62728");
  const char* labels[3] = {"cd", "emd", "total"};
  const char* colors[3] = {"#1f77b4", "#2ca02c", "#d62728"};
  for (int i = 0; i < 3; ++i) {
    const double ly = kMarginTop + 14.0 * i;
    out << "<line x1=\"" << kWidth - 120 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - 100
        << "\" y2=\"" << ly << "\" stroke=\"" << colors[i] << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kWidth - 95 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << labels[i] << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_density_boxplot(const std::vector<BoxSeries>& series, double radius) {
  if (series.empty()) throw InvalidArgument("svg_density_boxplot: no series");
  auto quantile = [](std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t k = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(k);
    return k + 1 < sorted.size() ? sorted[k] * (1.0 - f) + sorted[k + 1] * f : sorted[k];
  };

  struct Box {
    double q1, q2, q3, lo, hi;
    std::vector<double> outliers;
  };
  std::vector<Box> boxes;
  double max_y = 0.0;
  for (const BoxSeries& s : series) {
    if (s.counts.empty()) throw InvalidArgument("svg_density_boxplot: empty series " + s.label);
    std::vector<double> v(s.counts.begin(), s.counts.end());
    std::sort(v.begin(), v.end());
    Box b{};
    b.q1 = quantile(v, 0.25);
    b.q2 = quantile(v, 0.5);
    b.q3 = quantile(v, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.lo = v.front();
    b.hi = v.back();
    for (double x : v) {
      if (x >= lo_fence) {
        b.lo = x;
        break;
      }
    }
    for (auto it = v.rbegin(); it != v.rend(); ++it) {
      if (*it <= hi_fence) {
        b.hi = *it;
        break;
      }
    }
    for (double x : v) {
      if (x < lo_fence || x > hi_fence) b.outliers.push_back(x);
    }
    max_y = std::max(max_y, v.back());
    boxes.push_back(std::move(b));
  }

  Axis x{0.0, static_cast<double>(series.size()), kMarginLeft, kWidth - kMarginRight};
  Axis y{0.0, max_y * 1.05 + 1.0, kHeight - kMarginBottom, kMarginTop};

  std::ostringstream out;
  open_svg(out, "neighbor counts within " + num(radius) + " m");
  draw_axes(out, x, y, "", "points within radius");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    const double cx = x.map(static_cast<double>(i) + 0.5);
    const double half = (x.map(1.0) - x.map(0.0)) * 0.18;
    out << "<g stroke=\"#1f77b4\" fill=\"none\" stroke-width=\"1.5\">\n";
    out << "<rect x=\"" << cx - half << "\" y=\"" << y.map(b.q3) << "\" width=\"" << 2 * half
        << "\" height=\"" << y.map(b.q1) - y.map(b.q3) << "\"/>\n";
    out << "<line x1=\"" << cx - half << "\" y1=\"" << y.map(b.q2) << "\" x2=\"" << cx + half
        << "\" y2=\"" << y.map(b.q2) << "\" stroke=\"#d62728\"/>\n";
    out << "<line x1=\"" << cx << "\" y1=\"" << y.map(b.q3) << "\" x2=\"" << cx << "\" y2=\""
        << y.map(b.hi) << "\"/>\n";
    out << "<line x1=\"" << cx << "\" y1=\"" << y.map(b.q1) << "\" x2=\"" << cx << "\" y2=\""
        << y.map(b.lo) << "\"/>\n";
    out << "<line x1=\"" << cx - half * 0.6 << "\" y1=\"" << y.map(b.hi) << "\" x2=\""
        << cx + half * 0.6 << "\" y2=\"" << y.map(b.hi) << "\"/>\n";
    out << "<line x1=\"" << cx - half * 0.6 << "\" y1=\"" << y.map(b.lo) << "\" x2=\""
        << cx + half * 0.6 << "\" y2=\"" << y.map(b.lo) << "\"/>\n";
    out << "</g>\n";
    for (double o : boxes[i].outliers) {
      out << "<circle cx=\"" << cx << "\" cy=\"" << y.map(o)
          << "\" r=\"1.5\" fill=\"#1f77b4\" fill-opacity=\"0.5\"/>\n";
    }
    out << "<text x=\"" << cx << "\" y=\"" << kHeight - kMarginBottom + 30
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
        << series[i].label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_cloud_topdown(const PointCloud& cloud) {
  validate_cloud(cloud, "svg_cloud_topdown");
  const BoundingBox box = bounding_box(cloud);
  const double zr = std::max(box.max.z - box.min.z, 1e-9);

  Axis x{box.min.x, std::max(box.max.x, box.min.x + 1e-9), kMarginLeft, kWidth - kMarginRight};
  Axis y{box.min.y, std::max(box.max.y, box.min.y + 1e-9), kHeight - kMarginBottom, kMarginTop};
  // Equal scale on both axes.
  const double sx = (x.px1 - x.px0) / (x.hi - x.lo);
  const double sy = (y.px0 - y.px1) / (y.hi - y.lo);
  const double s = std::min(sx, sy);
  x.px1 = x.px0 + s * (x.hi - x.lo);
  y.px1 = y.px0 - s * (y.hi - y.lo);

  std::ostringstream out;
  open_svg(out, "top-down view (color = height)");
  draw_axes(out, x, y, "x [m]", "y [m]");
  for (const Point3& p : cloud.points) {
    out << "<circle cx=\"" << num(x.map(p.x)) << "\" cy=\"" << num(y.map(p.y))
        << "\" r=\"1.6\" fill=\"" << height_color((p.z - box.min.z) / zr) << "\"/>\n";
  }
  // Color bar legend.
  const double bar_x = kWidth - 40;
  for (int i = 0; i < 60; ++i) {
    const double t = 1.0 - static_cast<double>(i) / 59.0;
    out << "<rect x=\"" << bar_x << "\" y=\"" << kMarginTop + i * 3 << "\" width=\"12\" "
        << "height=\"3\" fill=\"" << height_color(t) << "\"/>\n";
  }
  out << "<text x=\"" << bar_x - 4 << "\" y=\"" << kMarginTop + 8
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << num(box.max.z)
      << "</text>\n";
  out << "<text x=\"" << bar_x - 4 << "\" y=\"" << kMarginTop + 180
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << num(box.min.z)
      << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace roofkit::cli
