#pragma once

#include <filesystem>

namespace fovrec {

struct PlotSummary {
  int lines = 0;  // one polyline per method
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
};

// Renders a sweep CSV (method, boundary_deg, detection_rate) as a line
// chart: boundary on x, detection rate on y, one colored line per method
// with a legend. Axis ranges cover the data.
PlotSummary plot_curves(const std::filesystem::path& csv_in, const std::filesystem::path& png_out);

}  // namespace fovrec
