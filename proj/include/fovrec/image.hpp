#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace fovrec {

// Row-major height x width x channels buffer with no value contract. Used for
// pyramid bands, weight maps and intermediate results.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(int y, int x, int c = 0) {
    return values_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double operator()(int y, int x, int c = 0) const {
    return values_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<double> data() noexcept { return values_; }
  std::span<const double> data() const noexcept { return values_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  double min() const;
  double max() const;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

Image operator+(const Image& a, const Image& b);
Image operator-(const Image& a, const Image& b);
Image operator*(double s, const Image& a);
double max_abs_diff(const Image& a, const Image& b);

enum class RangeTag { kUnit, kSigned };

// Three-channel image whose values are guaranteed to lie inside the declared
// range: [0, 1] for kUnit, [-1, 1] for kSigned.
class ImagePatch {
 public:
  static constexpr int kMinSide = 16;
  // Values within this distance outside the range are clamped rather than
  // rejected, so round-off from linear filters does not trip the check.
  static constexpr double kRangeSlack = 1e-9;

  explicit ImagePatch(Image pixels, RangeTag range = RangeTag::kUnit);

  int height() const noexcept { return pixels_.height(); }
  int width() const noexcept { return pixels_.width(); }
  RangeTag range() const noexcept { return range_; }
  const Image& pixels() const noexcept { return pixels_; }
  double operator()(int y, int x, int c) const { return pixels_(y, x, c); }

  ImagePatch to_signed() const;
  ImagePatch to_unit() const;

 private:
  Image pixels_;
  RangeTag range_;
};

// 8-bit PNG (or anything OpenCV decodes) mapped linearly to [0, 1]. Gray
// inputs are replicated to three channels; alpha is dropped.
ImagePatch read_image(const std::filesystem::path& path);
// Quantizes to 8 bits with round-to-nearest. Signed patches are converted first.
void write_png(const ImagePatch& patch, const std::filesystem::path& path);

// Extension check for the formats read_image is expected to decode.
bool is_image_file(const std::filesystem::path& path);
// Image files directly inside dir, sorted by path. Throws IoError if dir is
// not a directory.
std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir);

// Crops a height x width window starting at (y0, x0).
Image crop(const Image& img, int y0, int x0, int height, int width);

}  // namespace fovrec
