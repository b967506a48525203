#pragma once

#include "cal/cartography.hpp"
#include "cal/simulator.hpp"
#include "cal/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cal {

/// Affine mapping between data coordinates and pixel coordinates. Pixel y
/// grows downward, so data y maps to (py1 - ...).
struct PlotFrame {
  double px0 = 0, px1 = 0, py0 = 0, py1 = 0;  // pixel rectangle (py0 = top)
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;

  double to_px(double x) const { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); }
  double to_py(double y) const { return py1 - (y - ymin) / (ymax - ymin) * (py1 - py0); }
  double from_px(double px) const { return xmin + (px - px0) / (px1 - px0) * (xmax - xmin); }
  double from_py(double py) const { return ymin + (py1 - py) / (py1 - py0) * (ymax - ymin); }
};

/// Discrete correctness palette: linear-RGB ramp through
/// #d73027 (0) -> #fee08b (0.5) -> #1a9850 (1), sampled at E+1 levels.
std::string correctness_color(double correctness);

/// Data-map scatter: x = variability in [0, 0.5], y = confidence in [0, 1],
/// color = correctness binned into epochs+1 levels. Returns the frame used.
PlotFrame emit_svg_datamap(std::ostream& out, const DataMapStats& stats, Index epochs,
                           const std::string& title = "");
PlotFrame emit_svg_datamap(const std::string& path, const DataMapStats& stats, Index epochs,
                           const std::string& title = "");

/// Accuracy curves: one polyline per strategy of seed-mean accuracy against
/// the labeled fraction (raw counts when the train size is unknown).
PlotFrame emit_svg_curves(std::ostream& out, const std::vector<RunHistory>& histories,
                          const std::string& title = "");
PlotFrame emit_svg_curves(const std::string& path, const std::vector<RunHistory>& histories,
                          const std::string& title = "");

}  // namespace cal
