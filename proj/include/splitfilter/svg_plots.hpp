#pragma once

// Self-contained SVG emission for run artifacts: an evolution heat strip,
// per-step density snapshots, and the four-panel diagnostics figure. Only the
// CLI includes this header; the core library stays visualization-free.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "splitfilter/csv.hpp"
#include "splitfilter/errors.hpp"

namespace splitfilter::plots {

namespace svgdetail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

class Canvas {
 public:
  Canvas(double width, double height) : w_(width), h_(height) {
    buf_ = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w_) +
           "\" height=\"" + num(h_) + "\" viewBox=\"0 0 " + num(w_) + " " + num(h_) +
           "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill) {
    buf_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
            "\" height=\"" + num(h) + "\" fill=\"" + fill + "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0, const std::string& dash = "") {
    buf_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
            "\" y2=\"" + num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
            num(width) + "\"";
    if (!dash.empty()) buf_ += " stroke-dasharray=\"" + dash + "\"";
    buf_ += "/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& stroke, double width = 1.5,
                const std::string& dash = "") {
    buf_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
            num(width) + "\"";
    if (!dash.empty()) buf_ += " stroke-dasharray=\"" + dash + "\"";
    buf_ += " points=\"";
    for (const auto& [x, y] : pts) buf_ += num(x) + "," + num(y) + " ";
    buf_ += "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& anchor = "start") {
    buf_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" +
            std::to_string(size) + "\" font-family=\"sans-serif\" text-anchor=\"" +
            anchor + "\">" + s + "</text>\n";
  }

  void save(const std::string& path) {
    buf_ += "</svg>\n";
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fwrite(buf_.data(), 1, buf_.size(), f);
    std::fclose(f);
  }

 private:
  double w_, h_;
  std::string buf_;
};

// Compact blue->green->yellow ramp for the heat strip.
inline std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double anchors[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                                {94, 201, 98}, {253, 231, 37}};
  const double pos = t * 4.0;
  const int k = std::min(3, static_cast<int>(pos));
  const double w = pos - k;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rgb(%d,%d,%d)",
                static_cast<int>(anchors[k][0] * (1 - w) + anchors[k + 1][0] * w),
                static_cast<int>(anchors[k][1] * (1 - w) + anchors[k + 1][1] * w),
                static_cast<int>(anchors[k][2] * (1 - w) + anchors[k + 1][2] * w));
  return buf;
}

struct Frame {
  double x0, y0, w, h;      // pixel box
  double lo_x, hi_x, lo_y, hi_y;  // data ranges

  double px(double x) const { return x0 + (x - lo_x) / (hi_x - lo_x) * w; }
  double py(double y) const { return y0 + h - (y - lo_y) / (hi_y - lo_y) * h; }
};

inline void draw_axes(Canvas& c, const Frame& f, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel) {
  c.line(f.x0, f.y0, f.x0, f.y0 + f.h, "black");
  c.line(f.x0, f.y0 + f.h, f.x0 + f.w, f.y0 + f.h, "black");
  for (int k = 0; k <= 4; ++k) {
    const double tx = f.lo_x + (f.hi_x - f.lo_x) * k / 4.0;
    const double ty = f.lo_y + (f.hi_y - f.lo_y) * k / 4.0;
    c.line(f.px(tx), f.y0 + f.h, f.px(tx), f.y0 + f.h + 4, "black");
    c.text(f.px(tx), f.y0 + f.h + 16, label(tx), 10, "middle");
    c.line(f.x0 - 4, f.py(ty), f.x0, f.py(ty), "black");
    c.text(f.x0 - 6, f.py(ty) + 3, label(ty), 10, "end");
  }
  c.text(f.x0 + f.w / 2, f.y0 - 6, title, 12, "middle");
  c.text(f.x0 + f.w / 2, f.y0 + f.h + 30, xlabel, 11, "middle");
  c.text(f.x0 - 40, f.y0 + f.h / 2, ylabel, 11, "middle");
}

inline std::vector<std::pair<double, double>> curve(const Frame& f,
                                                    const std::vector<double>& xs,
                                                    const std::vector<double>& ys) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) pts.emplace_back(f.px(xs[i]), f.py(ys[i]));
  return pts;
}

inline std::string step_file(const std::string& dir, const char* stem, int n) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.csv", stem, n);
  return dir + "/" + buf;
}

}  // namespace svgdetail

// Heat strip of the posterior evolution: one row per step, early at the top.
inline void plot_evolution(const std::string& run_dir, const std::string& out_path) {
  using namespace svgdetail;
  std::vector<DensityCsv> steps;
  for (int n = 1;; ++n) {
    const auto path = step_file(run_dir, "posterior", n);
    if (!std::filesystem::exists(path)) break;
    steps.push_back(read_density_csv(path));
  }
  if (steps.empty()) throw ConfigError("no posterior files in " + run_dir);

  double vmax = 0.0;
  for (const auto& s : steps)
    for (double v : s.posterior) vmax = std::max(vmax, v);

  const int cols = 400;
  Canvas c(640, 120 + 8.0 * static_cast<double>(steps.size()));
  const Frame f{70, 40, 500, 8.0 * static_cast<double>(steps.size()),
                steps[0].x.front(), steps[0].x.back(), 0, 1};
  for (std::size_t n = 0; n < steps.size(); ++n) {
    const auto& s = steps[n];
    for (int j = 0; j < cols; ++j) {
      const std::size_t i = static_cast<std::size_t>(
          (s.x.size() - 1) * static_cast<double>(j) / (cols - 1));
      c.rect(f.x0 + f.w * j / cols, f.y0 + 8.0 * static_cast<double>(n), f.w / cols + 0.5,
             8.2, heat_color(s.posterior[i] / vmax));
    }
  }
  c.line(f.x0, f.y0, f.x0, f.y0 + f.h, "black");
  c.line(f.x0, f.y0 + f.h, f.x0 + f.w, f.y0 + f.h, "black");
  for (int k = 0; k <= 4; ++k) {
    const double tx = f.lo_x + (f.hi_x - f.lo_x) * k / 4.0;
    c.text(f.px(tx), f.y0 + f.h + 16, label(tx), 10, "middle");
  }
  c.text(f.x0 + f.w / 2, f.y0 - 16, "posterior evolution (top = first step)", 12, "middle");
  c.text(f.x0 + f.w / 2, f.y0 + f.h + 30, "x", 11, "middle");
  c.save(out_path);
}

// One density snapshot: neural prior, normalized posterior and, when an
// oracle directory is present, the oracle posterior for the same step.
inline void plot_snapshot(const std::string& run_dir, int step, const std::string& out_path,
                          const std::string& oracle_dir = "") {
  using namespace svgdetail;
  const auto d = read_density_csv(step_file(run_dir, "posterior", step));
  double vmax = 0.0;
  for (double v : d.prior) vmax = std::max(vmax, v);
  for (double v : d.posterior) vmax = std::max(vmax, v);

  DensityCsv oracle;
  const bool has_oracle =
      !oracle_dir.empty() && std::filesystem::exists(step_file(oracle_dir, "posterior", step));
  if (has_oracle) {
    oracle = read_density_csv(step_file(oracle_dir, "posterior", step));
    for (double v : oracle.posterior) vmax = std::max(vmax, v);
  }

  Canvas c(640, 420);
  const Frame f{70, 40, 520, 320, d.x.front(), d.x.back(), 0.0, vmax * 1.05};
  draw_axes(c, f, "step " + std::to_string(step), "x", "density");
  c.polyline(curve(f, d.x, d.prior), "#e6a817", 2.0);
  c.polyline(curve(f, d.x, d.posterior), "black", 1.5, "5,4");
  if (has_oracle) c.polyline(curve(f, oracle.x, oracle.posterior), "#7fb2d9", 2.0);
  c.text(f.x0 + 10, f.y0 + 14, "prior network", 11);
  c.text(f.x0 + 10, f.y0 + 28, "posterior (dashed)", 11);
  if (has_oracle) c.text(f.x0 + 10, f.y0 + 42, "oracle posterior", 11);
  c.save(out_path);
}

// Four panels: absolute mean error, training L2 curves, prior mass and
// Monte-Carlo acceptance rate.
inline void plot_diagnostics(const std::string& run_dir, const std::string& out_path) {
  using namespace svgdetail;
  const auto diag = read_diagnostics_csv(run_dir + "/diagnostics.csv");
  if (diag.rows.empty()) throw ConfigError("empty diagnostics in " + run_dir);
  std::vector<double> t, err, mass, acc;
  for (const auto& r : diag.rows) {
    t.push_back(r.time);
    err.push_back(std::isfinite(r.abs_mean_error) ? r.abs_mean_error : 0.0);
    mass.push_back(r.prior_mass);
    acc.push_back(r.acceptance_rate);
  }

  Canvas c(900, 640);
  auto panel = [&](int row, int col, const std::vector<double>& ys,
                   const std::string& title, double lo_pad, double hi_pad) {
    double lo = *std::min_element(ys.begin(), ys.end());
    double hi = *std::max_element(ys.begin(), ys.end());
    if (hi - lo < 1e-12) {
      lo -= 1e-3;
      hi += 1e-3;
    }
    const Frame f{70.0 + col * 440.0, 50.0 + row * 310.0, 340, 220, t.front(), t.back(),
                  lo - lo_pad * (hi - lo), hi + hi_pad * (hi - lo)};
    draw_axes(c, f, title, "t", "");
    c.polyline(curve(f, t, ys), "#31688e", 1.8);
    return f;
  };
  panel(0, 0, err, "absolute error in means", 0.05, 0.1);
  panel(1, 0, mass, "prior probability mass", 0.1, 0.1);
  panel(1, 1, acc, "Monte-Carlo acceptance rate", 0.1, 0.05);

  // panel (0,1): per-step training curves, L2-vs-reference when recorded,
  // training loss otherwise
  {
    std::vector<std::vector<std::pair<double, double>>> curves;
    double lo = 1e300, hi = -1e300;
    int max_epoch = 1;
    bool any_l2 = false;
    for (int n = 1;; ++n) {
      const auto path = step_file(run_dir, "training", n);
      if (!std::filesystem::exists(path)) break;
      std::FILE* fp = std::fopen(path.c_str(), "r");
      if (!fp) break;
      char buf[256];
      std::vector<std::pair<double, double>> pts;
      while (std::fgets(buf, sizeof(buf), fp)) {
        int epoch;
        double loss, lr, l2;
        const int k = std::sscanf(buf, "%d,%lf,%lf,%lf", &epoch, &loss, &lr, &l2);
        if (k == 4) {
          pts.emplace_back(epoch, l2);
          any_l2 = true;
        } else if (k == 3 && !any_l2) {
          if (epoch % 25 == 0) pts.emplace_back(epoch, loss);
        }
      }
      std::fclose(fp);
      for (const auto& [e, v] : pts) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        max_epoch = std::max(max_epoch, static_cast<int>(e));
      }
      if (!pts.empty()) curves.push_back(std::move(pts));
    }
    if (!curves.empty()) {
      const Frame f{510, 50, 340, 220, 1, static_cast<double>(max_epoch), lo, hi * 1.05};
      draw_axes(c, f, any_l2 ? "training L2 vs reference" : "training loss", "epoch", "");
      for (std::size_t k = 0; k < curves.size(); ++k) {
        std::vector<std::pair<double, double>> pix;
        for (const auto& [e, v] : curves[k]) pix.emplace_back(f.px(e), f.py(v));
        c.polyline(pix, heat_color(static_cast<double>(k) / std::max<std::size_t>(1, curves.size() - 1)),
                   1.0);
      }
    }
  }
  c.save(out_path);
}

// Everything for one run directory, into <run>/plots/.
inline void emit_run_plots(const std::string& run_dir) {
  const std::string plot_dir = run_dir + "/plots";
  std::filesystem::create_directories(plot_dir);
  plot_evolution(run_dir, plot_dir + "/evolution.svg");

  int n_steps = 0;
  while (std::filesystem::exists(svgdetail::step_file(run_dir, "posterior", n_steps + 1)))
    ++n_steps;
  std::string oracle_dir;
  for (const auto* cand : {"kalman_oracle", "grid_oracle", "fk_oracle"})
    if (std::filesystem::exists(run_dir + "/" + cand)) {
      oracle_dir = run_dir + "/" + cand;
      break;
    }
  const int early = std::max(1, n_steps / 6);
  const int mid = std::max(1, n_steps / 2);
  const int late = std::max(1, n_steps - 1);
  for (int step : {early, mid, late}) {
    char name[48];
    std::snprintf(name, sizeof(name), "/snapshot_%03d.svg", step);
    plot_snapshot(run_dir, step, plot_dir + name, oracle_dir);
  }
  plot_diagnostics(run_dir, plot_dir + "/diagnostics.svg");
}

}  // namespace splitfilter::plots
