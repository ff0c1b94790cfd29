#include "fovrec/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fovrec/errors.hpp"

namespace fovrec {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw ValidationError("image dimensions must be positive, got " + std::to_string(height) +
                          "x" + std::to_string(width) + "x" + std::to_string(channels));
  }
  values_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

double Image::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Image::max() const { return *std::max_element(values_.begin(), values_.end()); }

namespace {

void require_same_shape(const Image& a, const Image& b, const char* op) {
  if (!a.same_shape(b)) throw ValidationError(std::string(op) + ": image shapes differ");
}

}  // namespace

Image operator+(const Image& a, const Image& b) {
  require_same_shape(a, b, "operator+");
  Image out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

Image operator-(const Image& a, const Image& b) {
  require_same_shape(a, b, "operator-");
  Image out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  return out;
}

Image operator*(double s, const Image& a) {
  Image out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

ImagePatch::ImagePatch(Image pixels, RangeTag range) : pixels_(std::move(pixels)), range_(range) {
  if (pixels_.channels() != 3) {
    throw ValidationError("image patch must have 3 channels, got " +
                          std::to_string(pixels_.channels()));
  }
  if (pixels_.height() < kMinSide || pixels_.width() < kMinSide) {
    throw ValidationError("image patch must be at least 16x16, got " +
                          std::to_string(pixels_.height()) + "x" +
                          std::to_string(pixels_.width()));
  }
  const double lo = range_ == RangeTag::kUnit ? 0.0 : -1.0;
  const double hi = 1.0;
  for (double& v : pixels_.data()) {
    if (!(v >= lo - kRangeSlack && v <= hi + kRangeSlack)) {
      throw ValidationError("pixel value " + std::to_string(v) + " outside declared range [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    v = std::clamp(v, lo, hi);
  }
}

ImagePatch ImagePatch::to_signed() const {
  if (range_ == RangeTag::kSigned) return *this;
  Image out = pixels_;
  for (double& v : out.data()) v = 2.0 * v - 1.0;
  return ImagePatch(std::move(out), RangeTag::kSigned);
}

ImagePatch ImagePatch::to_unit() const {
  if (range_ == RangeTag::kUnit) return *this;
  Image out = pixels_;
  for (double& v : out.data()) v = 0.5 * (v + 1.0);
  return ImagePatch(std::move(out), RangeTag::kUnit);
}

ImagePatch read_image(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot read image: " + path.string());
  cv::Mat rgb;
  switch (raw.channels()) {
    case 1: cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw IoError("unsupported channel count in " + path.string());
  }
  double scale = 1.0 / 255.0;
  if (rgb.depth() == CV_16U) scale = 1.0 / 65535.0;
  else if (rgb.depth() != CV_8U) throw IoError("unsupported bit depth in " + path.string());
  cv::Mat as_double;
  rgb.convertTo(as_double, CV_64FC3, scale);
  Image img(as_double.rows, as_double.cols, 3);
  for (int y = 0; y < as_double.rows; ++y) {
    const auto* row = as_double.ptr<cv::Vec3d>(y);
    for (int x = 0; x < as_double.cols; ++x) {
      for (int c = 0; c < 3; ++c) img(y, x, c) = row[x][c];
    }
  }
  return ImagePatch(std::move(img));
}

void write_png(const ImagePatch& patch, const std::filesystem::path& path) {
  const ImagePatch unit = patch.to_unit();
  const Image& px = unit.pixels();
  cv::Mat bgr(px.height(), px.width(), CV_8UC3);
  for (int y = 0; y < px.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < px.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        row[x][2 - c] = static_cast<unsigned char>(std::lround(px(y, x, c) * 255.0));
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image: " + path.string());
}

Image crop(const Image& img, int y0, int x0, int height, int width) {
  if (y0 < 0 || x0 < 0 || y0 + height > img.height() || x0 + width > img.width()) {
    throw ValidationError("crop window exceeds image bounds");
  }
  Image out(height, width, img.channels());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < img.channels(); ++c) out(y, x, c) = img(y0 + y, x0 + x, c);
    }
  }
  return out;
}

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" ||
         ext == ".tiff";
}

std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace fovrec
