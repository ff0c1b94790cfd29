#include "fovrec/losses.hpp"

#include <cmath>
#include <fstream>
#include <mutex>

#include "fovrec/errors.hpp"
#include "fovrec/filter.hpp"

namespace fovrec {

torch::Tensor critic_loss(const CriticFn& critic, const torch::Tensor& target,
                          const torch::Tensor& fake) {
  if (target.sizes() != fake.sizes()) throw ValidationError("critic_loss: shapes differ");
  return critic(target).mean() - critic(fake).mean();
}

PenaltyResult gradient_penalty(const CriticFn& critic, const torch::Tensor& target,
                               const torch::Tensor& fake, double gp_weight,
                               std::optional<torch::Generator> gen) {
  if (target.sizes() != fake.sizes()) throw ValidationError("gradient_penalty: shapes differ");
  const int64_t n = target.size(0);
  const auto eps = gen ? torch::rand({n, 1, 1, 1}, *gen, target.options())
                       : torch::rand({n, 1, 1, 1}, target.options());
  auto mix = (eps * target.detach() + (1 - eps) * fake.detach()).set_requires_grad(true);
  const auto scores = critic(mix);
  // A critic that ignores its input has zero gradient.
  auto grads = scores.requires_grad()
                   ? torch::autograd::grad({scores.sum()}, {mix}, {}, true, true, true)[0]
                   : torch::Tensor();
  if (!grads.defined()) grads = torch::zeros_like(mix);
  const auto norms = grads.flatten(1).norm(2, 1);
  PenaltyResult r;
  r.penalty = gp_weight * (norms - 1).pow(2).mean();
  r.mean_grad_norm = norms.mean().item<double>();
  return r;
}

std::vector<double> gaussian_level_weights(int peak_level, double sigma, int n_levels) {
  if (n_levels < 1 || peak_level < 0 || peak_level >= n_levels) {
    throw ValidationError("peak level must lie in [0, n_levels)");
  }
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  std::vector<double> w(n_levels);
  double sum = 0.0;
  for (int l = 0; l < n_levels; ++l) {
    const double d = l - peak_level;
    w[l] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[l];
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

torch::Tensor reflect_indices(int64_t n, int pad) {
  std::vector<int64_t> idx(n + 2 * pad);
  for (int64_t i = 0; i < n + 2 * pad; ++i) {
    idx[i] = reflect_index(static_cast<int>(i - pad), static_cast<int>(n));
  }
  return torch::tensor(idx, torch::kLong);
}

// Separable 5-tap filter with reflect-101 padding on an N x C x H x W tensor.
torch::Tensor filter5(const torch::Tensor& x, const std::array<double, 5>& k) {
  const int64_t c = x.size(1);
  auto padded = x.index_select(2, reflect_indices(x.size(2), 2).to(x.device()))
                    .index_select(3, reflect_indices(x.size(3), 2).to(x.device()));
  const auto kt = torch::tensor(std::vector<double>(k.begin(), k.end()), x.options());
  const auto kx = kt.view({1, 1, 1, 5}).expand({c, 1, 1, 5}).contiguous();
  const auto ky = kt.view({1, 1, 5, 1}).expand({c, 1, 5, 1}).contiguous();
  const std::vector<int64_t> one{1, 1}, zero{0, 0};
  auto y = torch::conv2d(padded, kx, torch::Tensor(), one, zero, one, c);
  return torch::conv2d(y, ky, torch::Tensor(), one, zero, one, c);
}

constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
constexpr std::array<double, 5> kBinomialX2 = {2.0 / 16, 8.0 / 16, 12.0 / 16, 8.0 / 16, 2.0 / 16};

torch::Tensor down(const torch::Tensor& x) {
  using torch::indexing::Slice;
  return filter5(x, kBinomial).index({Slice(), Slice(), Slice(0, torch::indexing::None, 2),
                                      Slice(0, torch::indexing::None, 2)});
}

torch::Tensor up(const torch::Tensor& coarse, int64_t h, int64_t w) {
  using torch::indexing::Slice;
  auto z = torch::zeros({coarse.size(0), coarse.size(1), h, w}, coarse.options());
  z.index_put_({Slice(), Slice(), Slice(0, torch::indexing::None, 2),
                   Slice(0, torch::indexing::None, 2)},
                  coarse);
  return filter5(z, kBinomialX2);
}

}  // namespace

std::vector<torch::Tensor> laplacian_levels(const torch::Tensor& x, int n_levels) {
  if (n_levels < 1) throw ValidationError("n_levels must be >= 1");
  const int64_t min_side = std::min(x.size(2), x.size(3));
  if ((min_side >> (n_levels - 1)) < 2) {
    throw ValidationError("image of side " + std::to_string(min_side) + " is too small for " +
                          std::to_string(n_levels) + " pyramid levels");
  }
  std::vector<torch::Tensor> out;
  torch::Tensor g = x;
  for (int l = 0; l + 1 < n_levels; ++l) {
    const auto next = down(g);
    out.push_back(g - up(next, g.size(2), g.size(3)));
    g = next;
  }
  out.push_back(g);
  return out;
}

torch::Tensor laplacian_loss(const torch::Tensor& recon, const torch::Tensor& target,
                             const std::vector<double>& level_weights) {
  if (recon.sizes() != target.sizes()) throw ValidationError("laplacian_loss: shapes differ");
  const int n = static_cast<int>(level_weights.size());
  const auto a = laplacian_levels(recon, n);
  const auto b = laplacian_levels(target, n);
  torch::Tensor total = torch::zeros({}, recon.options());
  for (int l = 0; l < n; ++l) total = total + level_weights[l] * (a[l] - b[l]).pow(2).mean();
  return total;
}

const std::vector<std::string>& PerceptualDistance::taps() {
  static const std::vector<std::string> t = {"relu1_2", "relu2_2", "relu3_4", "relu4_4",
                                             "relu5_4"};
  return t;
}

std::filesystem::path default_perceptual_weights() {
  return std::filesystem::path(FOVREC_DATA_DIR) / "lpips_vgg_lin_v0.1.bin";
}

PerceptualDistance::PerceptualDistance(std::shared_ptr<const Backbone> backbone,
                                       const std::filesystem::path& weights_path,
                                       const std::string& sha256)
    : backbone_(std::move(backbone)) {
  if (!sha256.empty() && sha256_file(weights_path) != sha256) {
    throw IoError("checksum mismatch for " + weights_path.string());
  }
  std::ifstream in(weights_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + weights_path.string());
  for (const auto& tap : taps()) {
    const int c = backbone_layer(tap).channels;
    std::vector<float> w(c);
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(c * sizeof(float)));
    if (!in) throw IoError("perceptual weight file too short: " + weights_path.string());
    channel_weights_.push_back(
        torch::tensor(w).to(backbone_->dtype()).view({1, c, 1, 1}));
  }
}

std::shared_ptr<const PerceptualDistance> PerceptualDistance::shared() {
  static std::mutex mu;
  static std::shared_ptr<const PerceptualDistance> inst;
  std::lock_guard<std::mutex> lock(mu);
  if (!inst) {
    inst = std::make_shared<const PerceptualDistance>(Backbone::shared(),
                                                      default_perceptual_weights());
  }
  return inst;
}

torch::Tensor PerceptualDistance::operator()(const torch::Tensor& a, const torch::Tensor& b) const {
  if (a.sizes() != b.sizes()) throw ValidationError("perceptual distance: shapes differ");
  const int64_t n = a.size(0);
  const auto fa = backbone_->forward(torch::cat({a, b}, 0), taps());
  torch::Tensor total = torch::zeros({n}, a.options().dtype(backbone_->dtype()));
  for (std::size_t l = 0; l < taps().size(); ++l) {
    const auto& f = fa.at(taps()[l]);
    const auto norm = [](const torch::Tensor& t) {
      return t / (t.pow(2).sum(1, true).sqrt() + 1e-10);
    };
    const auto x = norm(f.narrow(0, 0, n));
    const auto y = norm(f.narrow(0, n, n));
    total = total + ((x - y).pow(2) * channel_weights_[l]).sum(1).mean({1, 2});
  }
  return total;
}

}  // namespace fovrec
