#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "conformal/errors.hpp"
#include "conformal/io.hpp"

namespace conformal {

// Direct SVG emission for the three result families: p-value heatmaps for
// full conformal, per-component interval glyphs for the other multivariate
// methods, and per-component band polygons for functional results.

namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Monotone white-to-blue ramp over delta in [0,1].
inline std::string delta_color(double delta) {
  const double t = std::clamp(delta, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255.0 + (8.0 - 255.0) * t));
  const int g = static_cast<int>(std::lround(255.0 + (81.0 - 255.0) * t));
  const int b = static_cast<int>(std::lround(255.0 + (156.0 - 255.0) * t));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

struct Panel {
  double x0, y0, width, height;  // pixel frame
  double dx0, dx1, dy0, dy1;     // data ranges

  double px(double x) const { return x0 + (x - dx0) / (dx1 - dx0) * width; }
  double py(double y) const { return y0 + height - (y - dy0) / (dy1 - dy0) * height; }
};

inline void frame(std::ostringstream& out, const Panel& p, const std::string& title) {
  out << "<rect x='" << num(p.x0) << "' y='" << num(p.y0) << "' width='" << num(p.width)
      << "' height='" << num(p.height)
      << "' fill='none' stroke='#444444' stroke-width='1'/>\n";
  out << "<text x='" << num(p.x0) << "' y='" << num(p.y0 - 6)
      << "' font-family='sans-serif' font-size='12' fill='#222222'>" << title << "</text>\n";
  out << "<text x='" << num(p.x0) << "' y='" << num(p.y0 + p.height + 14)
      << "' font-family='sans-serif' font-size='10' fill='#666666'>" << num(p.dx0)
      << "</text>\n";
  out << "<text x='" << num(p.x0 + p.width - 30) << "' y='" << num(p.y0 + p.height + 14)
      << "' font-family='sans-serif' font-size='10' fill='#666666'>" << num(p.dx1)
      << "</text>\n";
  out << "<text x='" << num(p.x0 - 4) << "' y='" << num(p.y0 + p.height)
      << "' font-family='sans-serif' font-size='10' fill='#666666' text-anchor='end'>"
      << num(p.dy0) << "</text>\n";
  out << "<text x='" << num(p.x0 - 4) << "' y='" << num(p.y0 + 10)
      << "' font-family='sans-serif' font-size='10' fill='#666666' text-anchor='end'>"
      << num(p.dy1) << "</text>\n";
}

}  // namespace svg

namespace detail {

inline double clamped(const nlohmann::json& v, double lo, double hi) {
  const double d = jnum_back(v);
  if (std::isnan(d)) return lo;
  return std::clamp(d, lo, hi);
}

inline void expand_range(const nlohmann::json& arr, double& lo, double& hi) {
  for (const auto& v : arr) {
    const double d = jnum_back(v);
    if (!std::isfinite(d)) continue;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

inline void render_full_panels(std::ostringstream& out, const nlohmann::json& doc, double width,
                               double panel_h, double& y_cursor) {
  const auto& axes = doc.at("axes");
  const auto& pvals = doc.at("pvals");
  require(axes.size() >= 1 && axes.size() <= 2, errc::unsupported_result,
          "full-conformal heatmaps support one or two response dimensions");
  for (std::size_t t = 0; t < pvals.size(); ++t) {
    svg::Panel p{60, y_cursor + 24, width - 90, panel_h, 0, 1, 0, 1};
    const auto& ax = axes[0];
    p.dx0 = ax.front().get<double>();
    p.dx1 = ax.back().get<double>();
    if (axes.size() == 2) {
      p.dy0 = axes[1].front().get<double>();
      p.dy1 = axes[1].back().get<double>();
    }
    // degenerate axes (all-zero responses) still need a drawable frame
    if (p.dx1 <= p.dx0) p.dx1 = p.dx0 + 1.0;
    if (p.dy1 <= p.dy0) p.dy1 = p.dy0 + 1.0;
    const std::size_t nx = ax.size();
    const std::size_t ny = axes.size() == 2 ? axes[1].size() : 1;
    const double cw = p.width / static_cast<double>(nx);
    const double ch = p.height / static_cast<double>(ny);
    const auto& grid = pvals[t];
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        // candidates are row-major with the last axis fastest
        const std::size_t flat = axes.size() == 2 ? i * ny + j : i;
        const double delta = grid[flat].get<double>();
        out << "<rect x='" << svg::num(p.x0 + static_cast<double>(i) * cw) << "' y='"
            << svg::num(p.y0 + p.height - static_cast<double>(j + 1) * ch) << "' width='"
            << svg::num(cw + 0.5) << "' height='" << svg::num(ch + 0.5) << "' fill='"
            << svg::delta_color(delta) << "'/>\n";
      }
    }
    svg::frame(out, p, "full conformal p-values, test point " + std::to_string(t + 1));
    y_cursor += panel_h + 48;
  }
}

inline void render_interval_panels(std::ostringstream& out, const nlohmann::json& doc,
                                   double width, double panel_h, double& y_cursor) {
  const auto& lo = doc.at("lo");
  const auto& up = doc.at("up");
  const auto& pred = doc.at("pred");
  const std::size_t n0 = lo.size();
  const std::size_t q = lo[0].size();
  const bool has_y0 = doc.contains("y0");
  for (std::size_t j = 0; j < q; ++j) {
    double dlo = std::numeric_limits<double>::max();
    double dhi = std::numeric_limits<double>::lowest();
    for (std::size_t t = 0; t < n0; ++t) {
      expand_range(nlohmann::json::array({lo[t][j], up[t][j], pred[t][j]}), dlo, dhi);
      if (has_y0) expand_range(nlohmann::json::array({doc["y0"][t][j]}), dlo, dhi);
    }
    if (dlo > dhi) {
      dlo = 0;
      dhi = 1;
    }
    const double pad = (dhi - dlo) * 0.05 + 1e-12;
    svg::Panel p{60, y_cursor + 24, width - 90, panel_h, 0.5, n0 + 0.5, dlo - pad, dhi + pad};
    for (std::size_t t = 0; t < n0; ++t) {
      const double cx = p.px(static_cast<double>(t + 1));
      const double ylo = p.py(clamped(lo[t][j], p.dy0, p.dy1));
      const double yup = p.py(clamped(up[t][j], p.dy0, p.dy1));
      out << "<line x1='" << svg::num(cx) << "' y1='" << svg::num(ylo) << "' x2='"
          << svg::num(cx) << "' y2='" << svg::num(yup)
          << "' stroke='#08519c' stroke-width='3' stroke-linecap='round' opacity='0.65'/>\n";
      out << "<circle cx='" << svg::num(cx) << "' cy='"
          << svg::num(p.py(clamped(pred[t][j], p.dy0, p.dy1)))
          << "' r='3' fill='#d94801'/>\n";
      if (has_y0)
        out << "<circle cx='" << svg::num(cx) << "' cy='"
            << svg::num(p.py(clamped(doc["y0"][t][j], p.dy0, p.dy1)))
            << "' r='2.5' fill='#222222'/>\n";
    }
    svg::frame(out, p,
               doc["method"].get<std::string>() + " intervals, component " + std::to_string(j + 1));
    y_cursor += panel_h + 48;
  }
}

inline void render_band_panels(std::ostringstream& out, const nlohmann::json& doc, double width,
                               double panel_h, double& y_cursor) {
  const auto& grids = doc.at("t");
  const auto& lo = doc.at("lo");
  const auto& up = doc.at("up");
  const auto& pred = doc.at("pred");
  const bool has_y0 = doc.contains("y0");
  const std::size_t n0 = lo.size();
  const std::size_t q = grids.size();
  for (std::size_t t = 0; t < n0; ++t) {
    for (std::size_t j = 0; j < q; ++j) {
      const auto& grid = grids[j];
      double dlo = std::numeric_limits<double>::max();
      double dhi = std::numeric_limits<double>::lowest();
      expand_range(lo[t][j], dlo, dhi);
      expand_range(up[t][j], dlo, dhi);
      if (has_y0 && doc["y0"].size() > t) expand_range(doc["y0"][t][j], dlo, dhi);
      if (dlo > dhi) {
        dlo = 0;
        dhi = 1;
      }
      const double pad = (dhi - dlo) * 0.05 + 1e-12;
      svg::Panel p{60,
                   y_cursor + 24,
                   width - 90,
                   panel_h,
                   grid.front().get<double>(),
                   grid.back().get<double>(),
                   dlo - pad,
                   dhi + pad};
      std::ostringstream poly;
      for (std::size_t i = 0; i < grid.size(); ++i)
        poly << svg::num(p.px(grid[i].get<double>())) << ","
             << svg::num(p.py(clamped(up[t][j][i], p.dy0, p.dy1))) << " ";
      for (std::size_t i = grid.size(); i-- > 0;)
        poly << svg::num(p.px(grid[i].get<double>())) << ","
             << svg::num(p.py(clamped(lo[t][j][i], p.dy0, p.dy1))) << " ";
      out << "<polygon points='" << poly.str() << "' fill='#9ecae1' opacity='0.6'/>\n";
      const auto polyline = [&](const nlohmann::json& curve, const char* color) {
        out << "<polyline points='";
        for (std::size_t i = 0; i < grid.size(); ++i)
          out << svg::num(p.px(grid[i].get<double>())) << ","
              << svg::num(p.py(clamped(curve[i], p.dy0, p.dy1))) << " ";
        out << "' fill='none' stroke='" << color << "' stroke-width='1.5'/>\n";
      };
      polyline(pred[t][j], "#08519c");
      if (has_y0 && doc["y0"].size() > t) polyline(doc["y0"][t][j], "#222222");
      svg::frame(out, p,
                 doc["method"].get<std::string>() + " band, test point " + std::to_string(t + 1) +
                     ", component " + std::to_string(j + 1));
      y_cursor += panel_h + 48;
    }
  }
}

}  // namespace detail

// Renders a result document produced by run(). Throws UnsupportedResult for
// documents without any plottable content.
inline std::string render_svg(const nlohmann::json& doc) {
  require(doc.is_object() && doc.value("schema", "") == "conformal-result/1",
          errc::unsupported_result, "not a conformal result document");
  const std::string mode = doc.value("mode", "");
  const std::string method = doc.value("method", "");

  const double width = 640;
  const double panel_h = 200;
  std::ostringstream body;
  double y_cursor = 8;

  if (mode == "multi" && method == "full") {
    require(doc.contains("pvals") && !doc["pvals"].empty(), errc::unsupported_result,
            "result has no p-value surfaces");
    detail::render_full_panels(body, doc, width, panel_h, y_cursor);
  } else if (mode == "multi") {
    require(doc.contains("lo") && !doc["lo"].empty(), errc::unsupported_result,
            "result has no prediction regions");
    detail::render_interval_panels(body, doc, width, panel_h, y_cursor);
  } else if (mode == "fd") {
    require(doc.contains("lo") && !doc["lo"].empty(), errc::unsupported_result,
            "result has no prediction bands");
    detail::render_band_panels(body, doc, width, panel_h, y_cursor);
  } else {
    throw error(errc::unsupported_result, "unknown result mode '" + mode + "'");
  }

  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << svg::num(y_cursor + 8) << "' viewBox='0 0 " << width << " " << svg::num(y_cursor + 8)
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
      << body.str() << "</svg>\n";
  return out.str();
}

inline void plot(const nlohmann::json& doc, const std::string& path) {
  const std::string svg_text = render_svg(doc);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::parse_error, "cannot write '" + path + "'");
  out << svg_text;
}

}  // namespace conformal
