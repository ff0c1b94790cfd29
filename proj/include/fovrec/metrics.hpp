#pragma once

#include <string>
#include <vector>

#include "fovrec/image.hpp"

namespace fovrec {

enum class MetricId { kL2, kSsim, kMsSsim, kLpips, kCalVgg };

MetricId parse_metric(const std::string& s);  // l2, ssim, msssim, lpips, calvgg
std::string to_string(MetricId m);

// Mean squared error over all channels.
double mse(const ImagePatch& a, const ImagePatch& b);

// Gaussian-window SSIM (11 x 11, sigma 1.5, K1 0.01, K2 0.03, data range 1),
// averaged over pixels and channels.
double ssim(const ImagePatch& a, const ImagePatch& b);

// Five-scale MS-SSIM with the standard exponents. Images too small for five
// scales use as many as fit (at least 11 pixels on the coarsest side) with
// the exponents renormalized.
double ms_ssim(const ImagePatch& a, const ImagePatch& b);

// Backbone layers whose distances feed the calibrated VGG metric: every
// convolution output after its ReLU and every pooling output.
const std::vector<std::string>& calvgg_layers();

// Per-layer distance between two patches on the max-pooling backbone:
// channel vectors are unit-normalized per position, the squared difference
// is summed over channels and averaged over positions.
std::vector<double> layer_distances(const ImagePatch& ref, const ImagePatch& test);
// Same for many pairs, batched through the backbone.
std::vector<std::vector<double>> layer_distances(const std::vector<ImagePatch>& refs,
                                                 const std::vector<ImagePatch>& tests);

// Dissimilarity before any logistic mapping; identical inputs give 0.
// SSIM and MS-SSIM are reported as 1 - similarity. CalVGG here is the
// uncalibrated sum of layer_distances.
double metric_score(MetricId metric, const ImagePatch& ref, const ImagePatch& test);

}  // namespace fovrec
