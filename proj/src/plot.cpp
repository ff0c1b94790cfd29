#include "fovrec/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fovrec/calibration.hpp"
#include "fovrec/errors.hpp"

namespace fovrec {

namespace {

std::string fmt(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const cv::Scalar kPalette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44},  {40, 39, 214},
                               {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};

}  // namespace

PlotSummary plot_curves(const std::filesystem::path& csv_in, const std::filesystem::path& png_out) {
  const auto rows = read_sweep_csv(csv_in);
  std::vector<std::string> order;
  std::map<std::string, std::vector<cv::Point2d>> series;
  for (const auto& r : rows) {
    if (!series.count(r.method)) order.push_back(r.method);
    series[r.method].push_back({r.boundary_deg, r.detection_rate});
  }
  PlotSummary s;
  s.lines = static_cast<int>(order.size());
  s.x_min = s.x_max = rows.front().boundary_deg;
  s.y_min = s.y_max = rows.front().detection_rate;
  for (const auto& r : rows) {
    s.x_min = std::min(s.x_min, r.boundary_deg);
    s.x_max = std::max(s.x_max, r.boundary_deg);
    s.y_min = std::min(s.y_min, r.detection_rate);
    s.y_max = std::max(s.y_max, r.detection_rate);
  }
  if (s.x_max == s.x_min) {
    s.x_min -= 0.5;
    s.x_max += 0.5;
  }
  const double pad = std::max(0.05 * (s.y_max - s.y_min), 1e-3);
  s.y_min -= pad;
  s.y_max += pad;

  const int w = 900, h = 560, left = 80, right = 200, top = 30, bottom = 60;
  cv::Mat img(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
  auto px = [&](cv::Point2d p) {
    const double fx = (p.x - s.x_min) / (s.x_max - s.x_min);
    const double fy = (p.y - s.y_min) / (s.y_max - s.y_min);
    return cv::Point(left + static_cast<int>(fx * (w - left - right)),
                     h - bottom - static_cast<int>(fy * (h - top - bottom)));
  };
  const cv::Scalar black(0, 0, 0), grid(225, 225, 225);
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  for (int i = 0; i <= 5; ++i) {
    const double y = s.y_min + (s.y_max - s.y_min) * i / 5.0;
    const double x = s.x_min + (s.x_max - s.x_min) * i / 5.0;
    cv::line(img, px({s.x_min, y}), px({s.x_max, y}), grid, 1);
    cv::line(img, px({x, s.y_min}), px({x, s.y_max}), grid, 1);
    cv::putText(img, fmt(y, 3), px({s.x_min, y}) + cv::Point(-70, 5), font, 0.45, black, 1);
    cv::putText(img, fmt(x, 1), px({x, s.y_min}) + cv::Point(-12, 22), font, 0.45, black, 1);
  }
  cv::rectangle(img, px({s.x_min, s.y_max}), px({s.x_max, s.y_min}), black, 1);
  cv::putText(img, "far-periphery boundary (deg)", cv::Point(left + 200, h - 12), font, 0.55, black, 1);
  cv::putText(img, "predicted detection rate", cv::Point(10, 20), font, 0.55, black, 1);
  for (std::size_t m = 0; m < order.size(); ++m) {
    auto pts = series[order[m]];
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
    std::vector<cv::Point> poly;
    for (const auto& p : pts) poly.push_back(px(p));
    const cv::Scalar color = kPalette[m % std::size(kPalette)];
    cv::polylines(img, poly, false, color, 2, cv::LINE_AA);
    for (const auto& p : poly) cv::circle(img, p, 3, color, cv::FILLED, cv::LINE_AA);
    const cv::Point at(w - right + 20, top + 20 + 24 * static_cast<int>(m));
    cv::line(img, at, at + cv::Point(30, 0), color, 3);
    cv::putText(img, order[m], at + cv::Point(38, 5), font, 0.5, black, 1);
  }
  if (png_out.has_parent_path()) std::filesystem::create_directories(png_out.parent_path());
  if (!cv::imwrite(png_out.string(), img)) throw IoError("cannot write " + png_out.string());
  return s;
}

}  // namespace fovrec
