#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/harness.hpp"

namespace finsler {

namespace {

std::string fixed(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  // "-0.000" and "0.000" must print alike for byte-stable output.
  return std::string(buf) == "-0.000" ? "0.000" : buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double left = 60.0, right = 20.0, top = 36.0, bottom = 44.0;
  double width, height;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

Frame make_frame(const std::vector<PlotSeries>& series, const PlotStyle& style) {
  Frame f{};
  f.width = style.width;
  f.height = style.height;
  if (style.bounds) {
    f.x0 = (*style.bounds)[0];
    f.x1 = (*style.bounds)[1];
    f.y0 = (*style.bounds)[2];
    f.y1 = (*style.bounds)[3];
  } else {
    f.x0 = f.y0 = std::numeric_limits<double>::infinity();
    f.x1 = f.y1 = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
      for (const auto& p : s.points) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) continue;
        f.x0 = std::min(f.x0, p[0]);
        f.x1 = std::max(f.x1, p[0]);
        f.y0 = std::min(f.y0, p[1]);
        f.y1 = std::max(f.y1, p[1]);
      }
    }
    if (!std::isfinite(f.x0)) throw Error(ErrorKind::EmptyInput, "no finite points to plot");
  }
  if (!(f.x1 > f.x0)) {
    f.x0 -= 0.5;
    f.x1 += 0.5;
  }
  if (!(f.y1 > f.y0)) {
    f.y0 -= 0.5;
    f.y1 += 0.5;
  }
  return f;
}

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series, const PlotStyle& style) {
  const bool any = std::any_of(series.begin(), series.end(), [](const PlotSeries& s) { return !s.points.empty(); });
  if (!any) throw Error(ErrorKind::EmptyInput, "nothing to plot");
  if (style.width <= 0 || style.height <= 0) throw Error(ErrorKind::InvalidArgument, "plot size must be positive");
  const Frame f = make_frame(series, style);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
      << "\" viewBox=\"0 0 " << style.width << ' ' << style.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << fixed(f.left) << "\" y=\"" << fixed(f.top) << "\" width=\""
      << fixed(f.width - f.left - f.right) << "\" height=\"" << fixed(f.height - f.top - f.bottom)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!style.title.empty()) {
    out << "<text x=\"" << fixed(f.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(style.title) << "</text>\n";
  }
  out << "<text x=\"" << fixed(f.width / 2) << "\" y=\"" << fixed(f.height - 10)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(style.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << fixed(f.height / 2) << "\" text-anchor=\"middle\" font-size=\"12\">"
      << escape(style.y_label) << "</text>\n";
  out << "<text x=\"" << fixed(f.left) << "\" y=\"" << fixed(f.height - f.bottom + 14) << "\" font-size=\"10\">"
      << fixed(f.x0) << "</text>\n";
  out << "<text x=\"" << fixed(f.width - f.right) << "\" y=\"" << fixed(f.height - f.bottom + 14)
      << "\" text-anchor=\"end\" font-size=\"10\">" << fixed(f.x1) << "</text>\n";
  out << "<text x=\"" << fixed(f.left - 4) << "\" y=\"" << fixed(f.height - f.bottom)
      << "\" text-anchor=\"end\" font-size=\"10\">" << fixed(f.y0) << "</text>\n";
  out << "<text x=\"" << fixed(f.left - 4) << "\" y=\"" << fixed(f.top + 10) << "\" text-anchor=\"end\" font-size=\"10\">"
      << fixed(f.y1) << "</text>\n";

  for (const auto& s : series) {
    if (s.points.empty()) continue;
    out << "<g fill=\"" << escape(s.color) << "\" stroke=\"" << escape(s.color) << "\">\n";
    if (s.line) {
      std::string d;
      bool pen_up = true;
      for (const auto& p : s.points) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
          pen_up = true;
          continue;
        }
        d += (pen_up ? (d.empty() ? "M" : " M") : " L") + fixed(f.px(p[0])) + ',' + fixed(f.py(p[1]));
        pen_up = false;
      }
      if (!d.empty()) out << "<path fill=\"none\" stroke-width=\"1\" d=\"" << d << "\"/>\n";
    } else {
      for (const auto& p : s.points) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) continue;
        out << "<circle cx=\"" << fixed(f.px(p[0])) << "\" cy=\"" << fixed(f.py(p[1])) << "\" r=\""
            << fixed(style.point_radius) << "\" stroke=\"none\"/>\n";
      }
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_section_plot(const std::vector<ReturnSample>& table, const PlotStyle& style) {
  PlotSeries images;
  PlotSeries arrows;
  arrows.line = true;
  arrows.color = "#d62728";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double span = 0.0;
  for (const auto& r : table) {
    if (r.ok()) span = std::max({span, std::abs(r.point.s), std::abs(r.point.u)});
  }
  for (const auto& r : table) {
    if (!r.ok()) continue;
    images.points.push_back({r.image.s, r.image.u});
    // Shorter displacements are invisible at plot resolution and would
    // only add noise to the document.
    if (std::hypot(r.image.s - r.point.s, r.image.u - r.point.u) > 1e-6 * std::max(1.0, span)) {
      arrows.points.push_back({r.point.s, r.point.u});
      arrows.points.push_back({r.image.s, r.image.u});
      arrows.points.push_back({nan, nan});
    }
  }
  if (images.points.empty()) throw Error(ErrorKind::EmptyInput, "return-map table has no successful samples");
  std::vector<PlotSeries> series;
  if (!arrows.points.empty()) series.push_back(std::move(arrows));
  series.push_back(std::move(images));
  return render_svg(series, style);
}

std::string render_section_plot(const OrbitTrace& trace, const PlotStyle& style) {
  if (trace.states.empty()) throw Error(ErrorKind::EmptyInput, "orbit trace is empty");
  PlotSeries curve;
  curve.line = true;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < trace.states.size(); ++i) {
    const auto& p = trace.states[i];
    if (i > 0) {
      const auto& q = trace.states[i - 1];
      // A jump of half a period in the reduced path is a wrap, not motion.
      const bool wrap1 = std::abs(p.x1 - q.x1) > 0.5 * trace.domain.period_x1;
      const bool wrap2 = trace.domain.period_x2 && std::abs(p.x2 - q.x2) > 0.5 * *trace.domain.period_x2;
      if (wrap1 || wrap2) curve.points.push_back({nan, nan});
    }
    curve.points.push_back({p.x1, p.x2});
  }
  return render_svg({curve}, style);
}

}  // namespace finsler
