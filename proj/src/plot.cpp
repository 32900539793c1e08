// Minimal deterministic SVG emitter for the episode plots.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "slstep/harness.hpp"

namespace slstep {

namespace {

constexpr double kW = 720, kPanelH = 340;
constexpr double kML = 64, kMR = 14, kMT = 30, kMB = 46;

const char* kPalette[] = {"#c0392b", "#2471a3", "#1e8449", "#7d3c98", "#b7950b"};

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad(double frac) {
    const double w = (hi - lo) > 1e-12 ? hi - lo : 1.0;
    lo -= frac * w;
    hi += frac * w;
  }
};

class Panel {
 public:
  Panel(std::string* out, double y0, Range xr, Range yr, std::string title,
        std::string xlabel, std::string ylabel)
      : out_(out), y0_(y0), xr_(xr), yr_(yr) {
    rect(kML, y0_ + kMT, kW - kML - kMR, kPanelH - kMT - kMB);
    text(kW / 2, y0_ + 18, title, "middle", 14);
    text(kW / 2, y0_ + kPanelH - 10, xlabel, "middle", 12);
    vtext(16, y0_ + kPanelH / 2, ylabel);
    ticks();
  }

  double px(double x) const {
    return kML + (x - xr_.lo) / (xr_.hi - xr_.lo) * (kW - kML - kMR);
  }
  double py(double y) const {
    return y0_ + kMT + (yr_.hi - y) / (yr_.hi - yr_.lo) * (kPanelH - kMT - kMB);
  }

  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& color, double width = 1.6, bool dashed = false,
                bool markers = false) {
    if (pts.empty()) return;
    *out_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
             fmt(width) + "\"";
    if (dashed) *out_ += " stroke-dasharray=\"6 4\"";
    *out_ += " points=\"";
    for (const auto& [x, y] : pts)
      *out_ += fmt(px(x)) + "," + fmt(py(y)) + " ";
    *out_ += "\"/>\n";
    if (markers)
      for (const auto& [x, y] : pts)
        *out_ += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) +
                 "\" r=\"2.4\" fill=\"" + color + "\"/>\n";
  }

  void hline(double y, const std::string& color) {
    if (y < yr_.lo || y > yr_.hi) return;
    *out_ += "<line x1=\"" + fmt(px(xr_.lo)) + "\" y1=\"" + fmt(py(y)) + "\" x2=\"" +
             fmt(px(xr_.hi)) + "\" y2=\"" + fmt(py(y)) + "\" stroke=\"" + color +
             "\" stroke-width=\"1.2\" stroke-dasharray=\"8 5\"/>\n";
  }

  void legend(const std::vector<std::pair<std::string, std::string>>& items) {
    double x = kML + 10, y = y0_ + kMT + 16;
    for (const auto& [label, color] : items) {
      *out_ += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(y - 4) + "\" x2=\"" +
               fmt(x + 22) + "\" y2=\"" + fmt(y - 4) + "\" stroke=\"" + color +
               "\" stroke-width=\"2.4\"/>\n";
      text(x + 28, y, label, "start", 12);
      y += 16;
    }
  }

 private:
  void rect(double x, double y, double w, double h) {
    *out_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
             "\" height=\"" + fmt(h) +
             "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  }
  void text(double x, double y, const std::string& s, const char* anchor,
            int size) {
    *out_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" +
             std::to_string(size) + "\" font-family=\"sans-serif\" text-anchor=\"" +
             anchor + "\">" + s + "</text>\n";
  }
  void vtext(double x, double y, const std::string& s) {
    *out_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) +
             "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" "
             "transform=\"rotate(-90 " +
             fmt(x) + " " + fmt(y) + ")\">" + s + "</text>\n";
  }
  void ticks() {
    for (int i = 0; i <= 5; ++i) {
      const double fx = xr_.lo + i * (xr_.hi - xr_.lo) / 5;
      const double fy = yr_.lo + i * (yr_.hi - yr_.lo) / 5;
      *out_ += "<line x1=\"" + fmt(px(fx)) + "\" y1=\"" +
               fmt(y0_ + kPanelH - kMB) + "\" x2=\"" + fmt(px(fx)) + "\" y2=\"" +
               fmt(y0_ + kPanelH - kMB + 4) + "\" stroke=\"#444444\"/>\n";
      text(px(fx), y0_ + kPanelH - kMB + 17, fmt(fx, "%.3g"), "middle", 11);
      *out_ += "<line x1=\"" + fmt(kML - 4) + "\" y1=\"" + fmt(py(fy)) + "\" x2=\"" +
               fmt(kML) + "\" y2=\"" + fmt(py(fy)) + "\" stroke=\"#444444\"/>\n";
      text(kML - 7, py(fy) + 4, fmt(fy, "%.3g"), "end", 11);
    }
  }

  std::string* out_;
  double y0_;
  Range xr_, yr_;
};

std::string svg_open(int panels) {
  const double h = panels * kPanelH;
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW, "%.0f") +
         "\" height=\"" + fmt(h, "%.0f") + "\" viewBox=\"0 0 " + fmt(kW, "%.0f") +
         " " + fmt(h, "%.0f") + "\">\n<rect width=\"100%\" height=\"100%\" "
         "fill=\"white\"/>\n";
}

// Residual pairs (learned eps vs H-LIP w_m) from consecutive push-free rows.
struct ResidualSeries {
  std::vector<std::pair<double, double>> eps_p, eps_v, wm_p, wm_v;
};

ResidualSeries residual_series(const std::vector<EpisodeLog>& logs,
                               const ExperimentConfig& cfg, const S2SModel& model) {
  ResidualSeries out;
  const auto [A, B] = s2s_matrices(cfg.hlip());
  int idx = 0;
  for (const auto& log : logs) {
    for (std::size_t i = 0; i + 1 < log.rows.size(); ++i) {
      const auto& a = log.rows[i].rec;
      const auto& b = log.rows[i + 1].rec;
      if (a.F_push != 0.0 || b.F_push != 0.0) continue;
      const Vec2 eps = b.x_pre.vec() - model.predict(a.x_pre.vec(), a.u_real);
      const Vec2 wm = b.x_pre.vec() - (A * a.x_pre.vec() + B * a.u_real);
      out.eps_p.push_back({idx, eps[0]});
      out.eps_v.push_back({idx, eps[1]});
      out.wm_p.push_back({idx, wm[0]});
      out.wm_v.push_back({idx, wm[1]});
      ++idx;
    }
  }
  return out;
}

}  // namespace

std::string render_plot(const std::vector<EpisodeLog>& logs, PlotKind kind,
                        const ExperimentConfig& cfg, const S2SModel& model) {
  if (logs.empty()) throw std::invalid_argument("render_plot: no logs");

  std::string svg;
  switch (kind) {
    case PlotKind::kVelocity: {
      Range xr, yr;
      for (const auto& log : logs)
        for (const auto& s : log.samples) {
          xr.include(s.t);
          yr.include(s.v);
        }
      yr.include(cfg.v_d);
      yr.pad(0.08);
      svg = svg_open(1);
      Panel p(&svg, 0, xr, yr, "horizontal COM velocity", "t [s]", "v [m/s]");
      p.hline(cfg.v_d, "#555555");
      std::vector<std::pair<std::string, std::string>> leg;
      for (std::size_t i = 0; i < logs.size(); ++i) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& s : logs[i].samples) pts.push_back({s.t, s.v});
        // Per-step fallback when no continuous trace was recorded.
        if (pts.empty())
          for (const auto& r : logs[i].rows)
            pts.push_back({r.rec.k * cfg.plant.T, r.rec.x_pre.v});
        const std::string color = kPalette[i % 5];
        p.polyline(pts, color);
        leg.push_back({logs[i].controller, color});
      }
      p.legend(leg);
      break;
    }
    case PlotKind::kInput: {
      Range xr, yr;
      for (const auto& log : logs)
        for (const auto& r : log.rows) {
          xr.include(r.rec.k);
          yr.include(r.rec.u_real);
        }
      yr.include(cfg.U.lo()[0]);
      yr.include(cfg.U.hi()[0]);
      yr.pad(0.08);
      svg = svg_open(1);
      Panel p(&svg, 0, xr, yr, "step size", "step k", "u [m]");
      p.hline(cfg.U.lo()[0], "#555555");
      p.hline(cfg.U.hi()[0], "#555555");
      std::vector<std::pair<std::string, std::string>> leg;
      for (std::size_t i = 0; i < logs.size(); ++i) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : logs[i].rows) pts.push_back({r.rec.k, r.rec.u_real});
        const std::string color = kPalette[i % 5];
        p.polyline(pts, color, 1.6, false, true);
        leg.push_back({logs[i].controller, color});
      }
      p.legend(leg);
      break;
    }
    case PlotKind::kResidual: {
      const ResidualSeries rs = residual_series(logs, cfg, model);
      if (rs.eps_p.empty())
        throw std::invalid_argument("render_plot: no push-free step pairs");
      Range xr, yp, yv;
      for (const auto& [x, y] : rs.eps_p) {
        xr.include(x);
        yp.include(y);
      }
      for (const auto& [x, y] : rs.wm_p) yp.include(y), (void)x;
      for (const auto& [x, y] : rs.eps_v) yv.include(y), (void)x;
      for (const auto& [x, y] : rs.wm_v) yv.include(y), (void)x;
      yp.pad(0.08);
      yv.pad(0.08);
      svg = svg_open(2);
      Panel pp(&svg, 0, xr, yp, "position residual", "step pair", "[m]");
      pp.polyline(rs.wm_p, kPalette[1]);
      pp.polyline(rs.eps_p, kPalette[0]);
      pp.legend({{"learned residual", kPalette[0]}, {"H-LIP discrepancy", kPalette[1]}});
      Panel pv(&svg, kPanelH, xr, yv, "velocity residual", "step pair", "[m/s]");
      pv.polyline(rs.wm_v, kPalette[1]);
      pv.polyline(rs.eps_v, kPalette[0]);
      break;
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace slstep
