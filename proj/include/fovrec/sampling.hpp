#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fovrec/image.hpp"

namespace fovrec {

// Binary sample mask. bits[y * width + x] is 1 where a pixel is sampled.
struct SamplingMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;
  double rate = 0.0;
  std::uint64_t seed = 0;

  bool at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t popcount() const;
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

// Number of samples a mask of the given rate carries: round(rate * H * W).
std::size_t sample_count(double rate, int height, int width);

// Dither (rank) matrix from the void-and-cluster algorithm on a torus with a
// Gaussian energy kernel. Thresholding it at any count gives a blue-noise mask.
struct RankMatrix {
  int height = 0;
  int width = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> rank;
};

RankMatrix void_and_cluster_ranks(int height, int width, std::uint64_t seed,
                                  double sigma = 1.5);
// Pixels whose rank is below round(rate * H * W). Optional toroidal shift.
SamplingMask threshold_ranks(const RankMatrix& ranks, double rate, int shift_y = 0,
                             int shift_x = 0);
SamplingMask void_and_cluster_mask(int height, int width, double rate, std::uint64_t seed);

// Uniform random positions without replacement, exactly round(rate * H * W).
SamplingMask uniform_random_mask(int height, int width, double rate, std::uint64_t seed);

// Dense values plus the mask; unsampled pixels hold zero.
struct SparseImage {
  Image values;
  SamplingMask mask;
};

SparseImage subsample(const ImagePatch& img, const SamplingMask& mask);

// Scattered-data interpolation by pull-push: masked box reductions up to a
// single pixel, then bilinear upsampling blended in where samples are
// missing. Sample positions keep their exact values. Needs >= 3 samples.
ImagePatch densify(const SparseImage& sparse);

// 1-bit PNG; rate and seed are not stored in the file.
void write_mask_png(const SamplingMask& mask, const std::filesystem::path& path);
SamplingMask read_mask_png(const std::filesystem::path& path);

}  // namespace fovrec
