#pragma once

// Atomic file output and small self-contained SVG plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "equidist.hpp"
#include "geometry.hpp"
#include "scenery.hpp"

namespace torus_equidist {

/// Writes to `path.tmp` and renames over `path`, so readers never observe a
/// partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << contents;
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <class Writer>
void atomic_write_with(const std::filesystem::path& path, Writer&& write) {
  std::ostringstream os;
  write(os);
  atomic_write(path, os.str());
}

namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
}

inline const std::vector<std::string> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

/// Line plot of one or more series on shared axes.
struct LinePlot {
  std::string title, xlabel, ylabel;
  std::vector<std::vector<double>> xs, ys;
  std::vector<std::string> colors;
  bool markers = true;
  std::vector<double> vlines;  // marked x positions

  std::string render(int w = 520, int h = 360) const {
    const double L = 60, R = 20, T = 30, B = 45;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (std::size_t k = 0; k < xs.size(); ++k)
      for (std::size_t i = 0; i < xs[k].size(); ++i)
        if (std::isfinite(xs[k][i]) && std::isfinite(ys[k][i])) {
          x0 = std::min(x0, xs[k][i]);
          x1 = std::max(x1, xs[k][i]);
          y0 = std::min(y0, ys[k][i]);
          y1 = std::max(y1, ys[k][i]);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (w - L - R); };
    const auto py = [&](double y) { return h - B - (y - y0) / (y1 - y0) * (h - T - B); };
    std::string s = header(w, h);
    s += text(w / 2.0, 18, title);
    s += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(w - L - R) + "\" height=\"" +
         num(h - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
      s += text(px(xv), h - B + 15, num(xv));
      s += text(L - 5, py(yv) + 4, num(yv), "end");
    }
    s += text(w / 2.0, h - 8, xlabel);
    s += "<text x=\"14\" y=\"" + num(h / 2.0) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " + num(h / 2.0) +
         ")\">" + ylabel + "</text>\n";
    for (double v : vlines)
      if (v >= x0 && v <= x1)
        s += "<line x1=\"" + num(px(v)) + "\" x2=\"" + num(px(v)) + "\" y1=\"" + num(T) + "\" y2=\"" + num(h - B) +
             "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const std::string& c = colors.empty() ? kPalette[k % kPalette.size()] : colors[k % colors.size()];
      std::string pts;
      for (std::size_t i = 0; i < xs[k].size(); ++i)
        if (std::isfinite(ys[k][i])) pts += num(px(xs[k][i])) + "," + num(py(ys[k][i])) + " ";
      s += "<polyline fill=\"none\" stroke=\"" + c + "\" points=\"" + pts + "\"/>\n";
      if (markers)
        for (std::size_t i = 0; i < xs[k].size(); ++i)
          if (std::isfinite(ys[k][i]))
            s += "<circle cx=\"" + num(px(xs[k][i])) + "\" cy=\"" + num(py(ys[k][i])) + "\" r=\"2.5\" fill=\"" + c + "\"/>\n";
    }
    return s + "</svg>\n";
  }
};

/// Heat map of |S(k,l) - T(k,l)|, k across, l down.
inline std::string deviation_heatmap(const EquidistReport& r, int cell = 18) {
  const int K = r.K, n = 2 * K + 1;
  const int L = 40, T = 30;
  const int w = L + n * cell + 20, h = T + n * cell + 30;
  std::string s = header(w, h);
  s += text(w / 2.0, 18, "|S - T|, max " + num(r.max_deviation));
  const double top = std::max(r.max_deviation, 1e-12);
  for (int k = -K; k <= K; ++k)
    for (int l = -K; l <= K; ++l) {
      const double v = std::abs(r.coeff_table.at(k, l) - r.target.at(k, l)) / top;
      const int g = 255 - static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#ff%02x%02x", g, g);
      s += "<rect x=\"" + std::to_string(L + (k + K) * cell) + "\" y=\"" + std::to_string(T + (K - l) * cell) +
           "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" + fill +
           "\" stroke=\"#ddd\"/>\n";
    }
  s += text(L + n * cell / 2.0, h - 8, "k");
  s += text(L / 2.0, T + n * cell / 2.0, "l");
  return s + "</svg>\n";
}

inline std::string trend_plot(const EquidistReport& r) {
  LinePlot p{"max deviation vs N", "log10 N", "max |S - T|", {{}}, {{}}, kPalette, true, {}};
  for (const auto& t : r.trend) {
    p.xs[0].push_back(std::log10(static_cast<double>(t.N)));
    p.ys[0].push_back(t.max_deviation);
  }
  return p.render();
}

inline std::string dimension_plot(const DimensionReport& r, const std::string& title) {
  LinePlot p{title, "log(1/delta)", "H_delta", {{}}, {{}}, kPalette, true, {}};
  for (std::size_t i = 0; i < r.scales.size(); ++i) {
    p.xs[0].push_back(-std::log(r.scales[i]));
    p.ys[0].push_back(r.entropy[i]);
  }
  return p.render();
}

inline std::string series_plot(const SceneryTrack& tr, Observable o) {
  LinePlot p{to_string(o), "t", "value", {{}}, {{}}, kPalette, true, {}};
  p.markers = false;
  const auto& s = tr.observable(o);
  for (std::size_t j = 0; j < s.size(); ++j) {
    p.xs[0].push_back(tr.frames[j].t);
    p.ys[0].push_back(s[j]);
  }
  return p.render();
}

inline std::string periodogram_plot(const Periodogram& pg, const std::string& title, std::vector<double> marks = {}) {
  LinePlot p{title, "frequency", "power", {pg.frequency}, {pg.power}, kPalette, true, {}};
  p.vlines = std::move(marks);
  return p.render();
}

}  // namespace svg

}  // namespace torus_equidist
