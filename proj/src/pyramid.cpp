#include "fovrec/pyramid.hpp"

#include <array>
#include <string>

#include "fovrec/errors.hpp"
#include "fovrec/filter.hpp"

namespace fovrec {

namespace {

constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
constexpr std::array<double, 5> kBinomialX2 = {2.0 / 16, 8.0 / 16, 12.0 / 16, 8.0 / 16, 2.0 / 16};

int half_up(int n) { return (n + 1) / 2; }

}  // namespace

Image pyr_down(const Image& img) {
  const Image blurred = separable_filter(img, kBinomial, kBinomial);
  Image out(half_up(img.height()), half_up(img.width()), img.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) out(y, x, c) = blurred(2 * y, 2 * x, c);
    }
  }
  return out;
}

Image pyr_up(const Image& coarse, int height, int width) {
  if (half_up(height) != coarse.height() || half_up(width) != coarse.width()) {
    throw ValidationError("pyr_up: target size inconsistent with coarse level");
  }
  Image sparse(height, width, coarse.channels());
  for (int y = 0; y < coarse.height(); ++y) {
    for (int x = 0; x < coarse.width(); ++x) {
      for (int c = 0; c < coarse.channels(); ++c) sparse(2 * y, 2 * x, c) = coarse(y, x, c);
    }
  }
  return separable_filter(sparse, kBinomialX2, kBinomialX2);
}

LaplacianPyramid build_laplacian_pyramid(const Image& img, int n_levels) {
  if (n_levels < 1) throw ValidationError("build_laplacian_pyramid: n_levels must be >= 1");
  const int min_side = std::min(img.height(), img.width());
  if ((min_side >> (n_levels - 1)) < 2) {
    throw ValidationError("build_laplacian_pyramid: " + std::to_string(n_levels) +
                          " levels is too many for a " + std::to_string(img.height()) + "x" +
                          std::to_string(img.width()) + " image");
  }
  LaplacianPyramid pyr;
  Image current = img;
  for (int l = 0; l + 1 < n_levels; ++l) {
    Image next = pyr_down(current);
    pyr.bands.push_back(current - pyr_up(next, current.height(), current.width()));
    current = std::move(next);
  }
  pyr.residual = std::move(current);
  return pyr;
}

LaplacianPyramid build_laplacian_pyramid(const ImagePatch& img, int n_levels) {
  return build_laplacian_pyramid(img.pixels(), n_levels);
}

Image collapse_pyramid(const LaplacianPyramid& pyramid) {
  if (pyramid.residual.empty()) throw ValidationError("collapse_pyramid: empty residual");
  for (std::size_t l = 0; l < pyramid.bands.size(); ++l) {
    const Image& fine = pyramid.bands[l];
    const Image& coarse = pyramid.level(static_cast<int>(l) + 1);
    if (half_up(fine.height()) != coarse.height() || half_up(fine.width()) != coarse.width() ||
        fine.channels() != coarse.channels()) {
      throw ValidationError("collapse_pyramid: level " + std::to_string(l + 1) +
                            " size inconsistent with level " + std::to_string(l));
    }
  }
  Image current = pyramid.residual;
  for (int l = static_cast<int>(pyramid.bands.size()) - 1; l >= 0; --l) {
    const Image& band = pyramid.bands[l];
    current = band + pyr_up(current, band.height(), band.width());
  }
  return current;
}

}  // namespace fovrec
