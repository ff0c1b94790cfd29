#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <opencv2/core.hpp>

#include "fovrec/sampling.hpp"

namespace fovrec::test {

// Mean power of the mean-removed mask over the annulus 0 < |f| <= max_freq
// (cycles per pixel), computed with a 2-D DFT.
inline double low_frequency_power(const SamplingMask& m, double max_freq = 1.0 / 16.0) {
  cv::Mat img(m.height, m.width, CV_64F);
  const double mean = static_cast<double>(m.popcount()) / static_cast<double>(m.pixel_count());
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) img.at<double>(y, x) = (m.at(y, x) ? 1.0 : 0.0) - mean;
  }
  cv::Mat spec;
  cv::dft(img, spec, cv::DFT_COMPLEX_OUTPUT);
  double sum = 0.0;
  int count = 0;
  for (int v = 0; v < m.height; ++v) {
    const double fy = (v <= m.height / 2 ? v : v - m.height) / static_cast<double>(m.height);
    for (int u = 0; u < m.width; ++u) {
      const double fx = (u <= m.width / 2 ? u : u - m.width) / static_cast<double>(m.width);
      const double f = std::hypot(fx, fy);
      if (f <= 0.0 || f > max_freq) continue;
      const cv::Vec2d z = spec.at<cv::Vec2d>(v, u);
      sum += (z[0] * z[0] + z[1] * z[1]) / static_cast<double>(m.pixel_count());
      ++count;
    }
  }
  return sum / count;
}

// Smallest pairwise toroidal distance between samples (brute force).
inline double min_sample_distance(const SamplingMask& m) {
  std::vector<std::pair<int, int>> pts;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (m.at(y, x)) pts.emplace_back(y, x);
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      int dy = std::abs(pts[i].first - pts[j].first);
      int dx = std::abs(pts[i].second - pts[j].second);
      dy = std::min(dy, m.height - dy);
      dx = std::min(dx, m.width - dx);
      best = std::min(best, std::hypot(dx, dy));
    }
  }
  return best;
}

}  // namespace fovrec::test
