#include "fovrec/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "fovrec/backbone.hpp"
#include "fovrec/errors.hpp"
#include "fovrec/losses.hpp"
#include "fovrec/tensor.hpp"

namespace fovrec {

MetricId parse_metric(const std::string& s) {
  if (s == "l2") return MetricId::kL2;
  if (s == "ssim") return MetricId::kSsim;
  if (s == "msssim") return MetricId::kMsSsim;
  if (s == "lpips") return MetricId::kLpips;
  if (s == "calvgg") return MetricId::kCalVgg;
  throw ValidationError("unknown metric: " + s + " (expected l2, ssim, msssim, lpips or calvgg)");
}

std::string to_string(MetricId m) {
  switch (m) {
    case MetricId::kL2: return "l2";
    case MetricId::kSsim: return "ssim";
    case MetricId::kMsSsim: return "msssim";
    case MetricId::kLpips: return "lpips";
    case MetricId::kCalVgg: return "calvgg";
  }
  return "?";
}

namespace {

void require_same(const ImagePatch& a, const ImagePatch& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ValidationError("metric inputs differ in size: " + std::to_string(a.height()) + "x" +
                          std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                          std::to_string(b.width()));
  }
}

cv::Mat to_mat(const ImagePatch& p) {
  const ImagePatch u = p.to_unit();
  cv::Mat m(u.height(), u.width(), CV_64FC3);
  std::copy(u.pixels().data().begin(), u.pixels().data().end(), m.ptr<double>());
  return m;
}

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

cv::Mat gauss(const cv::Mat& m) {
  cv::Mat out;
  cv::GaussianBlur(m, out, cv::Size(11, 11), 1.5, 1.5, cv::BORDER_REFLECT_101);
  return out;
}

// Mean SSIM and mean contrast-structure term at one scale.
std::pair<double, double> ssim_terms(const cv::Mat& x, const cv::Mat& y) {
  const cv::Mat mx = gauss(x), my = gauss(y);
  const cv::Mat mx2 = mx.mul(mx), my2 = my.mul(my), mxy = mx.mul(my);
  const cv::Mat vx = gauss(x.mul(x)) - mx2, vy = gauss(y.mul(y)) - my2, cxy = gauss(x.mul(y)) - mxy;
  const cv::Scalar c1 = cv::Scalar::all(kC1), c2 = cv::Scalar::all(kC2);
  cv::Mat cs = (2 * cxy + c2) / (vx + vy + c2);
  cv::Mat lum = (2 * mxy + c1) / (mx2 + my2 + c1);
  const cv::Mat s = lum.mul(cs);
  const cv::Scalar ms = cv::mean(s), mc = cv::mean(cs);
  return {(ms[0] + ms[1] + ms[2]) / 3.0, (mc[0] + mc[1] + mc[2]) / 3.0};
}

cv::Mat half(const cv::Mat& m) {
  cv::Mat out;
  cv::resize(m, out, cv::Size(m.cols / 2, m.rows / 2), 0, 0, cv::INTER_AREA);
  return out;
}

}  // namespace

double mse(const ImagePatch& a, const ImagePatch& b) {
  require_same(a, b);
  const ImagePatch ua = a.to_unit(), ub = b.to_unit();
  const auto da = ua.pixels().data(), db = ub.pixels().data();
  double s = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) s += (da[i] - db[i]) * (da[i] - db[i]);
  return s / static_cast<double>(da.size());
}

double ssim(const ImagePatch& a, const ImagePatch& b) {
  require_same(a, b);
  return ssim_terms(to_mat(a), to_mat(b)).first;
}

double ms_ssim(const ImagePatch& a, const ImagePatch& b) {
  require_same(a, b);
  static constexpr std::array<double, 5> kWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  int scales = 1;
  while (scales < 5 && (std::min(a.height(), a.width()) >> scales) >= 11) ++scales;
  double wsum = 1.0;
  if (scales < 5) wsum = std::accumulate(kWeights.begin(), kWeights.begin() + scales, 0.0);
  cv::Mat x = to_mat(a), y = to_mat(b);
  double out = 1.0;
  for (int s = 0; s < scales; ++s) {
    const auto [full, cs] = ssim_terms(x, y);
    const double term = s + 1 == scales ? full : cs;
    out *= std::pow(std::max(term, 0.0), kWeights[s] / wsum);
    if (s + 1 < scales) {
      x = half(x);
      y = half(y);
    }
  }
  return out;
}

const std::vector<std::string>& calvgg_layers() {
  static const std::vector<std::string> layers = [] {
    std::vector<std::string> out;
    for (const auto& l : backbone_layers()) {
      if (l.kind != LayerKind::kConv) out.push_back(l.name);
    }
    return out;
  }();
  return layers;
}

std::vector<double> layer_distances(const ImagePatch& ref, const ImagePatch& test) {
  return layer_distances(std::vector<ImagePatch>{ref}, std::vector<ImagePatch>{test}).front();
}

std::vector<std::vector<double>> layer_distances(const std::vector<ImagePatch>& refs,
                                                 const std::vector<ImagePatch>& tests) {
  if (refs.size() != tests.size()) throw ValidationError("layer_distances: pair count mismatch");
  constexpr std::size_t kChunk = 16;
  const auto backbone = Backbone::shared();
  const auto norm = [](const torch::Tensor& t) {
    return t / (t.pow(2).sum(1, true).sqrt() + 1e-10);
  };
  torch::NoGradGuard guard;
  std::vector<std::vector<double>> out;
  out.reserve(refs.size());
  for (std::size_t first = 0; first < refs.size(); first += kChunk) {
    const std::size_t n = std::min(kChunk, refs.size() - first);
    std::vector<torch::Tensor> parts;
    for (std::size_t i = first; i < first + n; ++i) {
      require_same(refs[i], tests[i]);
      if (i > first && (refs[i].height() != refs[first].height() ||
                        refs[i].width() != refs[first].width())) {
        throw ValidationError("layer_distances: batched pairs must share one size");
      }
      parts.push_back(to_tensor(refs[i].to_unit(), backbone->dtype()));
    }
    for (std::size_t i = first; i < first + n; ++i) {
      parts.push_back(to_tensor(tests[i].to_unit(), backbone->dtype()));
    }
    const auto maps = backbone->forward(torch::cat(parts, 0), calvgg_layers());
    const auto m = static_cast<int64_t>(n);
    std::vector<torch::Tensor> per_layer;
    for (const auto& name : calvgg_layers()) {
      const auto& f = maps.at(name);
      per_layer.push_back((norm(f.narrow(0, 0, m)) - norm(f.narrow(0, m, m)))
                              .pow(2)
                              .sum(1)
                              .mean({1, 2})
                              .to(torch::kFloat64)
                              .contiguous());
    }
    for (int64_t i = 0; i < m; ++i) {
      std::vector<double> d;
      d.reserve(per_layer.size());
      for (const auto& t : per_layer) d.push_back(t.data_ptr<double>()[i]);
      out.push_back(std::move(d));
    }
  }
  return out;
}

double metric_score(MetricId metric, const ImagePatch& ref, const ImagePatch& test) {
  require_same(ref, test);
  switch (metric) {
    case MetricId::kL2: return mse(ref, test);
    case MetricId::kSsim: return 1.0 - ssim(ref, test);
    case MetricId::kMsSsim: return 1.0 - ms_ssim(ref, test);
    case MetricId::kLpips: {
      torch::NoGradGuard guard;
      return (*PerceptualDistance::shared())(to_tensor(ref.to_unit()), to_tensor(test.to_unit()))
          .item<double>();
    }
    case MetricId::kCalVgg: {
      const auto d = layer_distances(ref, test);
      return std::accumulate(d.begin(), d.end(), 0.0);
    }
  }
  return 0.0;
}

}  // namespace fovrec
