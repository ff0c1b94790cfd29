#pragma once

#include <span>
#include <vector>

#include "fovrec/image.hpp"

namespace fovrec {

// Mirror index into [0, n) without repeating the edge sample (…2 1 |0 1 2… n-2 n-1| n-2…).
int reflect_index(int i, int n) noexcept;

// Separable correlation with an odd-length kernel applied along rows then
// columns, reflect padding on both axes.
Image separable_filter(const Image& img, std::span<const double> kernel_x,
                       std::span<const double> kernel_y);

// Sampled Gaussian of radius ceil(3 * sigma), normalized to sum 1.
std::vector<double> gaussian_kernel(double sigma);

// sigma == 0 returns the input unchanged; sigma < 0 is rejected.
Image gaussian_blur(const Image& img, double sigma);
ImagePatch gaussian_blur(const ImagePatch& img, double sigma);

}  // namespace fovrec
