#include "fovrec/filter.hpp"

#include <cmath>
#include <string>

#include "fovrec/errors.hpp"

namespace fovrec {

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Image separable_filter(const Image& img, std::span<const double> kernel_x,
                       std::span<const double> kernel_y) {
  if (kernel_x.size() % 2 == 0 || kernel_y.size() % 2 == 0) {
    throw ValidationError("separable_filter: kernels must have odd length");
  }
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  const int rx = static_cast<int>(kernel_x.size() / 2);
  const int ry = static_cast<int>(kernel_y.size() / 2);

  Image tmp(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -rx; k <= rx; ++k) acc += kernel_x[k + rx] * img(y, reflect_index(x + k, w), c);
        tmp(y, x, c) = acc;
      }
    }
  }
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -ry; k <= ry; ++k) acc += kernel_y[k + ry] * tmp(reflect_index(y + k, h), x, c);
        out(y, x, c) = acc;
      }
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian_kernel: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma < 0.0 || std::isnan(sigma)) {
    throw ValidationError("gaussian_blur: sigma must be >= 0, got " + std::to_string(sigma));
  }
  if (sigma == 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  return separable_filter(img, k, k);
}

ImagePatch gaussian_blur(const ImagePatch& img, double sigma) {
  return ImagePatch(gaussian_blur(img.pixels(), sigma), img.range());
}

}  // namespace fovrec
