#pragma once

#include <vector>

#include "fovrec/image.hpp"

namespace fovrec {

// Burt-Adelson Laplacian pyramid with the 5-tap binomial kernel and reflect
// padding. Level l has ceil(H / 2^l) x ceil(W / 2^l) pixels; levels
// 0 .. n-2 are band-pass images and level n-1 is the coarsest Gaussian level.
struct LaplacianPyramid {
  std::vector<Image> bands;
  Image residual;

  int n_levels() const noexcept { return static_cast<int>(bands.size()) + 1; }
  const Image& level(int l) const { return l + 1 < n_levels() ? bands[l] : residual; }
  Image& level(int l) { return l + 1 < n_levels() ? bands[l] : residual; }
};

// Blur with [1 4 6 4 1]/16 and keep even samples.
Image pyr_down(const Image& img);
// Zero-insert to height x width and interpolate with the same kernel (gain 4).
Image pyr_up(const Image& coarse, int height, int width);

// Requires n_levels >= 1 and min(H, W) / 2^(n_levels - 1) >= 2.
LaplacianPyramid build_laplacian_pyramid(const Image& img, int n_levels);
LaplacianPyramid build_laplacian_pyramid(const ImagePatch& img, int n_levels);

// Inverse of build_laplacian_pyramid; rejects pyramids whose level sizes do
// not follow the halving rule.
Image collapse_pyramid(const LaplacianPyramid& pyramid);

}  // namespace fovrec
