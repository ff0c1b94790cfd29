#include "fovrec/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <opencv2/imgcodecs.hpp>

#include "fovrec/errors.hpp"
#include "fovrec/rng.hpp"

namespace fovrec {

std::size_t SamplingMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::size_t sample_count(double rate, int height, int width) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(height) * width));
}

namespace {

void check_rate(double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ValidationError("sampling rate must be in (0, 1], got " + std::to_string(rate));
  }
}

// Segment tree returning the index of the extreme value. Excluded leaves hold
// the sentinel so they never win. Ties resolve to the lowest index.
class ArgTree {
 public:
  ArgTree(std::size_t n, bool want_max)
      : n_(n), want_max_(want_max),
        sentinel_(want_max ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity()) {
    size_ = 1;
    while (size_ < n_) size_ <<= 1;
    value_.assign(n_, sentinel_);
    node_.assign(2 * size_, 0);
    for (std::size_t i = 0; i < size_; ++i) node_[size_ + i] = std::min(i, n_ - 1);
    for (std::size_t i = size_ - 1; i >= 1; --i) node_[i] = pick(node_[2 * i], node_[2 * i + 1]);
  }

  void set(std::size_t i, double v) {
    value_[i] = v;
    for (std::size_t p = (size_ + i) >> 1; p >= 1; p >>= 1) {
      node_[p] = pick(node_[2 * p], node_[2 * p + 1]);
    }
  }
  void exclude(std::size_t i) { set(i, sentinel_); }
  bool included(std::size_t i) const { return value_[i] != sentinel_; }
  std::size_t best() const { return node_[1]; }

 private:
  std::size_t pick(std::size_t a, std::size_t b) const {
    const double va = value_[a], vb = value_[b];
    if (va == vb) return std::min(a, b);
    return (want_max_ ? va > vb : va < vb) ? a : b;
  }

  std::size_t n_;
  std::size_t size_;
  bool want_max_;
  double sentinel_;
  std::vector<double> value_;
  std::vector<std::size_t> node_;
};

// Gaussian energy of the current pattern on a torus, mirrored into two trees:
// the maximum over set pixels (tightest cluster) and the minimum over unset
// pixels (largest void).
class EnergyField {
 public:
  EnergyField(int h, int w, double sigma)
      : h_(h), w_(w), energy_(static_cast<std::size_t>(h) * w, 0.0),
        set_(energy_.size(), 0), clusters_(energy_.size(), true), voids_(energy_.size(), false) {
    radius_ = static_cast<int>(std::ceil(4.0 * sigma));
    const int side = 2 * radius_ + 1;
    kernel_.resize(static_cast<std::size_t>(side) * side);
    for (int dy = -radius_; dy <= radius_; ++dy) {
      for (int dx = -radius_; dx <= radius_; ++dx) {
        kernel_[(dy + radius_) * side + dx + radius_] =
            std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
    }
    for (std::size_t i = 0; i < energy_.size(); ++i) voids_.set(i, 0.0);
  }

  bool is_set(std::size_t i) const { return set_[i] != 0; }

  void toggle(std::size_t idx, bool on) {
    set_[idx] = on ? 1 : 0;
    const double sign = on ? 1.0 : -1.0;
    const int cy = static_cast<int>(idx / w_), cx = static_cast<int>(idx % w_);
    const int side = 2 * radius_ + 1;
    for (int dy = -radius_; dy <= radius_; ++dy) {
      const int y = ((cy + dy) % h_ + h_) % h_;
      for (int dx = -radius_; dx <= radius_; ++dx) {
        const int x = ((cx + dx) % w_ + w_) % w_;
        const std::size_t j = static_cast<std::size_t>(y) * w_ + x;
        energy_[j] += sign * kernel_[(dy + radius_) * side + dx + radius_];
      }
    }
    // Refresh every pixel touched by the kernel (the torus may wrap onto
    // itself for tiny masks, so gather the set first).
    for (int dy = -radius_; dy <= radius_; ++dy) {
      const int y = ((cy + dy) % h_ + h_) % h_;
      for (int dx = -radius_; dx <= radius_; ++dx) {
        const int x = ((cx + dx) % w_ + w_) % w_;
        refresh(static_cast<std::size_t>(y) * w_ + x);
      }
    }
    refresh(idx);
  }

  std::size_t tightest_cluster() const { return clusters_.best(); }
  std::size_t largest_void() const { return voids_.best(); }

 private:
  void refresh(std::size_t j) {
    if (set_[j]) {
      clusters_.set(j, energy_[j]);
      voids_.exclude(j);
    } else {
      voids_.set(j, energy_[j]);
      clusters_.exclude(j);
    }
  }

  int h_, w_, radius_;
  std::vector<double> kernel_;
  std::vector<double> energy_;
  std::vector<std::uint8_t> set_;
  ArgTree clusters_;
  ArgTree voids_;
};

}  // namespace

RankMatrix void_and_cluster_ranks(int height, int width, std::uint64_t seed, double sigma) {
  if (height <= 0 || width <= 0) throw ValidationError("mask dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(height) * width;
  RankMatrix out{height, width, seed, std::vector<std::uint32_t>(n, 0)};
  if (n == 1) return out;

  // Initial binary pattern: ~10% random ones, then relaxed by moving the
  // tightest cluster into the largest void until the two coincide.
  Rng rng(Rng::derive(seed, "void-and-cluster"));
  const std::size_t initial = std::max<std::size_t>(1, n / 10);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < initial; ++i) {
    std::swap(order[i], order[i + rng.uniform_index(n - i)]);
  }
  EnergyField field(height, width, sigma);
  for (std::size_t i = 0; i < initial; ++i) field.toggle(order[i], true);
  for (std::size_t iter = 0; iter < 10 * n; ++iter) {
    const std::size_t cluster = field.tightest_cluster();
    field.toggle(cluster, false);
    const std::size_t hole = field.largest_void();
    if (hole == cluster) {
      field.toggle(cluster, true);
      break;
    }
    field.toggle(hole, true);
  }
  std::vector<std::uint8_t> prototype(n, 0);
  for (std::size_t i = 0; i < n; ++i) prototype[i] = field.is_set(i) ? 1 : 0;

  // Ranks below the prototype: repeatedly remove the tightest cluster.
  {
    EnergyField down = field;
    for (std::size_t r = initial; r-- > 0;) {
      const std::size_t cluster = down.tightest_cluster();
      down.toggle(cluster, false);
      out.rank[cluster] = static_cast<std::uint32_t>(r);
    }
  }
  // Ranks above: repeatedly fill the largest void. With a linear energy the
  // "tightest cluster of zeros" past half occupancy is the same pixel.
  for (std::size_t r = initial; r < n; ++r) {
    const std::size_t hole = field.largest_void();
    field.toggle(hole, true);
    out.rank[hole] = static_cast<std::uint32_t>(r);
  }
  return out;
}

SamplingMask threshold_ranks(const RankMatrix& ranks, double rate, int shift_y, int shift_x) {
  check_rate(rate);
  SamplingMask m;
  m.height = ranks.height;
  m.width = ranks.width;
  m.rate = rate;
  m.seed = ranks.seed;
  m.bits.assign(static_cast<std::size_t>(m.height) * m.width, 0);
  const std::size_t count = sample_count(rate, m.height, m.width);
  for (int y = 0; y < m.height; ++y) {
    const int sy = ((y + shift_y) % m.height + m.height) % m.height;
    for (int x = 0; x < m.width; ++x) {
      const int sx = ((x + shift_x) % m.width + m.width) % m.width;
      if (ranks.rank[static_cast<std::size_t>(sy) * m.width + sx] < count) {
        m.bits[static_cast<std::size_t>(y) * m.width + x] = 1;
      }
    }
  }
  return m;
}

SamplingMask void_and_cluster_mask(int height, int width, double rate, std::uint64_t seed) {
  check_rate(rate);
  return threshold_ranks(void_and_cluster_ranks(height, width, seed), rate);
}

SamplingMask uniform_random_mask(int height, int width, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ValidationError("sampling rate must be in [0, 1], got " + std::to_string(rate));
  }
  SamplingMask m;
  m.height = height;
  m.width = width;
  m.rate = rate;
  m.seed = seed;
  const std::size_t n = m.pixel_count();
  m.bits.assign(n, 0);
  const std::size_t count = sample_count(rate, height, width);
  Rng rng(Rng::derive(seed, "uniform-mask"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + rng.uniform_index(n - i)]);
    m.bits[order[i]] = 1;
  }
  return m;
}

SparseImage subsample(const ImagePatch& img, const SamplingMask& mask) {
  if (mask.height != img.height() || mask.width != img.width()) {
    throw ValidationError("subsample: mask and image dimensions differ");
  }
  const ImagePatch unit = img.to_unit();
  SparseImage out{Image(img.height(), img.width(), 3), mask};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int c = 0; c < 3; ++c) out.values(y, x, c) = unit(y, x, c);
    }
  }
  return out;
}

namespace {

struct PullLevel {
  Image value;   // normalized colour
  Image weight;  // min(1, accumulated sample weight)
};

Image bilinear_upsample(const Image& coarse, int height, int width) {
  Image out(height, width, coarse.channels());
  const double sy = static_cast<double>(coarse.height()) / height;
  const double sx = static_cast<double>(coarse.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, coarse.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, coarse.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, coarse.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, coarse.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < coarse.channels(); ++c) {
        out(y, x, c) = (1 - ty) * ((1 - tx) * coarse(y0, x0, c) + tx * coarse(y0, x1, c)) +
                       ty * ((1 - tx) * coarse(y1, x0, c) + tx * coarse(y1, x1, c));
      }
    }
  }
  return out;
}

}  // namespace

ImagePatch densify(const SparseImage& sparse) {
  const SamplingMask& mask = sparse.mask;
  const Image& values = sparse.values;
  if (mask.height != values.height() || mask.width != values.width()) {
    throw ValidationError("densify: mask and image dimensions differ");
  }
  if (mask.popcount() < 3) throw ValidationError("densify: need at least 3 samples");

  std::vector<PullLevel> levels;
  {
    PullLevel base{values, Image(values.height(), values.width(), 1)};
    for (int y = 0; y < values.height(); ++y) {
      for (int x = 0; x < values.width(); ++x) base.weight(y, x) = mask.at(y, x) ? 1.0 : 0.0;
    }
    levels.push_back(std::move(base));
  }
  // Pull: masked 2x2 box reduction until one pixel remains.
  while (levels.back().value.height() > 1 || levels.back().value.width() > 1) {
    const PullLevel& fine = levels.back();
    const int h = (fine.value.height() + 1) / 2, w = (fine.value.width() + 1) / 2;
    PullLevel coarse{Image(h, w, 3), Image(h, w, 1)};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double wsum = 0.0;
        double acc[3] = {0.0, 0.0, 0.0};
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int fy = 2 * y + dy, fx = 2 * x + dx;
            if (fy >= fine.value.height() || fx >= fine.value.width()) continue;
            const double wt = fine.weight(fy, fx);
            wsum += wt;
            for (int c = 0; c < 3; ++c) acc[c] += wt * fine.value(fy, fx, c);
          }
        }
        if (wsum > 0.0) {
          for (int c = 0; c < 3; ++c) coarse.value(y, x, c) = acc[c] / wsum;
        }
        coarse.weight(y, x) = std::min(1.0, wsum);
      }
    }
    levels.push_back(std::move(coarse));
  }
  // Push: fill each level's gaps from the upsampled, already-filled coarser level.
  Image filled = levels.back().value;
  for (int l = static_cast<int>(levels.size()) - 2; l >= 0; --l) {
    const PullLevel& lev = levels[l];
    const Image up = bilinear_upsample(filled, lev.value.height(), lev.value.width());
    Image next(lev.value.height(), lev.value.width(), 3);
    for (int y = 0; y < next.height(); ++y) {
      for (int x = 0; x < next.width(); ++x) {
        const double wt = lev.weight(y, x);
        for (int c = 0; c < 3; ++c) {
          next(y, x, c) = wt * lev.value(y, x, c) + (1.0 - wt) * up(y, x, c);
        }
      }
    }
    filled = std::move(next);
  }
  for (int y = 0; y < filled.height(); ++y) {
    for (int x = 0; x < filled.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int c = 0; c < 3; ++c) filled(y, x, c) = values(y, x, c);
    }
  }
  return ImagePatch(std::move(filled));
}

void write_mask_png(const SamplingMask& mask, const std::filesystem::path& path) {
  cv::Mat img(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) img.at<unsigned char>(y, x) = mask.at(y, x) ? 255 : 0;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::vector<int> params = {cv::IMWRITE_PNG_BILEVEL, 1};
  if (!cv::imwrite(path.string(), img, params)) {
    throw IoError("cannot write mask: " + path.string());
  }
}

SamplingMask read_mask_png(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw IoError("cannot read mask: " + path.string());
  SamplingMask m;
  m.height = img.rows;
  m.width = img.cols;
  m.bits.assign(m.pixel_count(), 0);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      m.bits[static_cast<std::size_t>(y) * m.width + x] = img.at<unsigned char>(y, x) > 127 ? 1 : 0;
    }
  }
  m.rate = static_cast<double>(m.popcount()) / static_cast<double>(m.pixel_count());
  return m;
}

}  // namespace fovrec
