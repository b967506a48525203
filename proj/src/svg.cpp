#include "cal/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace cal {

namespace {

constexpr double kWidth = 800, kHeight = 600;
constexpr double kLeft = 70, kRight = 30, kTop = 30, kBottom = 60;

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void open_svg(std::ostream& out) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
}

void draw_axes(std::ostream& out, const PlotFrame& f, const std::string& xlabel,
               const std::string& ylabel, const std::string& title) {
  out << "  <rect x=\"" << px(f.px0) << "\" y=\"" << px(f.py0) << "\" width=\""
      << px(f.px1 - f.px0) << "\" height=\"" << px(f.py1 - f.py0)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double fx = f.xmin + (f.xmax - f.xmin) * t / ticks;
    const double fy = f.ymin + (f.ymax - f.ymin) * t / ticks;
    char label[32];
    out << "  <line x1=\"" << px(f.to_px(fx)) << "\" y1=\"" << px(f.py1) << "\" x2=\""
        << px(f.to_px(fx)) << "\" y2=\"" << px(f.py1 + 5) << "\" stroke=\"black\"/>\n";
    std::snprintf(label, sizeof(label), "%.2f", fx);
    out << "  <text x=\"" << px(f.to_px(fx)) << "\" y=\"" << px(f.py1 + 20)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << label << "</text>\n";
    out << "  <line x1=\"" << px(f.px0 - 5) << "\" y1=\"" << px(f.to_py(fy)) << "\" x2=\""
        << px(f.px0) << "\" y2=\"" << px(f.to_py(fy)) << "\" stroke=\"black\"/>\n";
    std::snprintf(label, sizeof(label), "%.2f", fy);
    out << "  <text x=\"" << px(f.px0 - 8) << "\" y=\"" << px(f.to_py(fy) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << label << "</text>\n";
  }
  out << "  <text x=\"" << px((f.px0 + f.px1) / 2) << "\" y=\"" << px(kHeight - 15)
      << "\" font-size=\"14\" text-anchor=\"middle\">" << escape_xml(xlabel) << "</text>\n";
  out << "  <text x=\"18\" y=\"" << px((f.py0 + f.py1) / 2)
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << px((f.py0 + f.py1) / 2) << ")\">" << escape_xml(ylabel) << "</text>\n";
  if (!title.empty())
    out << "  <text x=\"" << px((f.px0 + f.px1) / 2)
        << "\" y=\"20\" font-size=\"15\" text-anchor=\"middle\">" << escape_xml(title)
        << "</text>\n";
}

struct Rgb {
  double r, g, b;
};

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

const char* kCurveColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                              "#9467bd", "#8c564b", "#e377c2"};

}  // namespace

std::string correctness_color(double correctness) {
  const Rgb low{0xd7, 0x30, 0x27}, mid{0xfe, 0xe0, 0x8b}, high{0x1a, 0x98, 0x50};
  const double t = std::clamp(correctness, 0.0, 1.0);
  const Rgb c = t < 0.5 ? lerp(low, mid, t * 2.0) : lerp(mid, high, (t - 0.5) * 2.0);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround(c.r)),
                static_cast<int>(std::lround(c.g)), static_cast<int>(std::lround(c.b)));
  return buf;
}

PlotFrame emit_svg_datamap(std::ostream& out, const DataMapStats& stats, Index epochs,
                           const std::string& title) {
  if (stats.instances() == 0) throw std::invalid_argument("emit_svg_datamap: no instances");
  if (epochs < 1) throw std::invalid_argument("emit_svg_datamap: epochs must be >= 1");
  PlotFrame f{kLeft, kWidth - kRight, kTop, kHeight - kBottom, 0.0, 0.5, 0.0, 1.0};
  open_svg(out);
  draw_axes(out, f, "variability", "confidence", title);
  for (Index i = 0; i < stats.instances(); ++i) {
    // Correctness is a multiple of 1/epochs; snap to its level for the color.
    const double level =
        std::round(stats.correctness(i) * static_cast<double>(epochs)) /
        static_cast<double>(epochs);
    out << "  <circle cx=\"" << px(f.to_px(stats.variability(i))) << "\" cy=\""
        << px(f.to_py(stats.confidence(i))) << "\" r=\"3\" fill=\"" << correctness_color(level)
        << "\" fill-opacity=\"0.7\"/>\n";
  }
  out << "</svg>\n";
  return f;
}

PlotFrame emit_svg_datamap(const std::string& path, const DataMapStats& stats, Index epochs,
                           const std::string& title) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  PlotFrame f = emit_svg_datamap(out, stats, epochs, title);
  if (!out.good()) throw std::runtime_error("write failed: " + path);
  return f;
}

PlotFrame emit_svg_curves(std::ostream& out, const std::vector<RunHistory>& histories,
                          const std::string& title) {
  if (histories.empty()) throw std::invalid_argument("emit_svg_curves: no histories");

  // Seed-mean accuracy per iteration, per strategy.
  struct Curve {
    std::string name;
    std::vector<double> x, y;
  };
  std::vector<Curve> curves;
  std::size_t iteration_count = 0;
  for (const RunHistory& h : histories) {
    if (h.runs.empty()) throw std::invalid_argument("emit_svg_curves: history without runs");
    const std::size_t n = h.runs.front().evals.size();
    if (iteration_count == 0) iteration_count = n;
    if (n != iteration_count)
      throw std::invalid_argument("emit_svg_curves: iteration counts differ between histories");
    Curve curve;
    curve.name = h.strategy;
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (const SeedRun& run : h.runs) {
        if (run.evals.size() != n)
          throw std::invalid_argument("emit_svg_curves: iteration counts differ between seeds");
        mean += run.evals[i].accuracy;
      }
      mean /= static_cast<double>(h.runs.size());
      double x = static_cast<double>(h.runs.front().evals[i].labeled_count);
      if (h.train_size > 0) x /= static_cast<double>(h.train_size);
      curve.x.push_back(x);
      curve.y.push_back(mean);
    }
    curves.push_back(std::move(curve));
  }

  double xmin = curves[0].x.front(), xmax = curves[0].x.back();
  for (const Curve& c : curves) {
    xmin = std::min(xmin, *std::min_element(c.x.begin(), c.x.end()));
    xmax = std::max(xmax, *std::max_element(c.x.begin(), c.x.end()));
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  PlotFrame f{kLeft, kWidth - kRight, kTop, kHeight - kBottom, xmin, xmax, 0.0, 1.0};

  const bool fractional = histories[0].train_size > 0;
  open_svg(out);
  draw_axes(out, f, fractional ? "labeled fraction" : "labeled instances", "accuracy", title);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kCurveColors[c % (sizeof(kCurveColors) / sizeof(kCurveColors[0]))];
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curves[c].x.size(); ++i) {
      if (i) out << ' ';
      out << px(f.to_px(curves[c].x[i])) << ',' << px(f.to_py(curves[c].y[i]));
    }
    out << "\"/>\n";
    const double ly = kTop + 18 + 18 * static_cast<double>(c);
    out << "  <line x1=\"" << px(f.px1 - 150) << "\" y1=\"" << px(ly) << "\" x2=\""
        << px(f.px1 - 125) << "\" y2=\"" << px(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "  <text x=\"" << px(f.px1 - 118) << "\" y=\"" << px(ly + 4)
        << "\" font-size=\"12\">" << escape_xml(curves[c].name) << "</text>\n";
  }
  out << "</svg>\n";
  return f;
}

PlotFrame emit_svg_curves(const std::string& path, const std::vector<RunHistory>& histories,
                          const std::string& title) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  PlotFrame f = emit_svg_curves(out, histories, title);
  if (!out.good()) throw std::runtime_error("write failed: " + path);
  return f;
}

}  // namespace cal
