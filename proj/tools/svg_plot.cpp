#include "svg_plot.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "scd/io.hpp"

namespace scd::cli {

namespace {

std::string fmt(double x) {
  // Two decimals are plenty for screen coordinates and keep files small.
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(2);
  ss << x;
  return ss.str();
}

}  // namespace

std::string trajectory_svg(const Trajectory& pred, const Trajectory& gt, int size) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double zmin = xmin, zmax = -xmin;
  for (const Trajectory* t : {&pred, &gt}) {
    for (std::size_t i = 0; i < t->size(); ++i) {
      const Eigen::Vector3d p = t->position(i);
      xmin = std::min(xmin, p.x());
      xmax = std::max(xmax, p.x());
      zmin = std::min(zmin, p.z());
      zmax = std::max(zmax, p.z());
    }
  }
  if (!(xmax >= xmin)) xmin = xmax = zmin = zmax = 0.0;
  const double margin = 30.0;
  const double span = std::max({xmax - xmin, zmax - zmin, 1e-9});
  const double scale = (size - 2.0 * margin) / span;
  const double x0 = margin + 0.5 * ((size - 2.0 * margin) - (xmax - xmin) * scale);
  const double z0 = margin + 0.5 * ((size - 2.0 * margin) - (zmax - zmin) * scale);
  auto path = [&](const Trajectory& t) {
    std::string pts;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const Eigen::Vector3d p = t.position(i);
      // z grows upward on screen.
      const double sx = x0 + (p.x() - xmin) * scale;
      const double sy = size - (z0 + (p.z() - zmin) * scale);
      if (!pts.empty()) pts += ' ';
      pts += fmt(sx) + "," + fmt(sy);
    }
    return pts;
  };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) + "\" height=\"" +
       std::to_string(size) + "\" viewBox=\"0 0 " + std::to_string(size) + " " + std::to_string(size) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"" + path(gt) + "\"/>\n";
  s += "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6,3\" points=\"" +
       path(pred) + "\"/>\n";
  s += "<text x=\"10\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">ground truth (black), prediction "
       "(red dashed); x right, z up; span " + io::format_double(span) + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace scd::cli
