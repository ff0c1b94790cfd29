#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "fovrec/backbone.hpp"

namespace fovrec {

// Maps N x 3 x H x W images to N scores.
using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

// mean D(target) - mean D(fake).
torch::Tensor critic_loss(const CriticFn& critic, const torch::Tensor& target,
                          const torch::Tensor& fake);

struct PenaltyResult {
  torch::Tensor penalty;  // gp_weight * mean((|grad| - 1)^2)
  double mean_grad_norm = 0.0;
};

// Penalty at random convex combinations of target and fake. The mixing
// coefficients come from `gen` so the result is reproducible.
PenaltyResult gradient_penalty(const CriticFn& critic, const torch::Tensor& target,
                               const torch::Tensor& fake, double gp_weight,
                               std::optional<torch::Generator> gen = std::nullopt);

// w_l proportional to exp(-(l - peak)^2 / (2 sigma^2)), summing to 1.
std::vector<double> gaussian_level_weights(int peak_level, double sigma, int n_levels);

// Differentiable Laplacian pyramid with the same kernel, padding and level
// layout as build_laplacian_pyramid; the last entry is the residual.
std::vector<torch::Tensor> laplacian_levels(const torch::Tensor& x, int n_levels);

// sum_l w_l * MSE(level_l(recon), level_l(target)).
torch::Tensor laplacian_loss(const torch::Tensor& recon, const torch::Tensor& target,
                             const std::vector<double>& level_weights);

// Learned-linear-weight perceptual distance over backbone activations:
// per layer, unit-normalize channels, square the difference, weight each
// channel, average over space, then sum over layers.
class PerceptualDistance {
 public:
  static constexpr const char* kDefaultWeightsSha256 =
      "9153a2043dccf3b525d4f13db916e93ef040548ea923b6f2100de5ebac141a78";

  // weights_path: raw little-endian float32, channel weights of the five
  // taps back to back. sha256 may be empty to skip verification.
  PerceptualDistance(std::shared_ptr<const Backbone> backbone,
                     const std::filesystem::path& weights_path,
                     const std::string& sha256 = kDefaultWeightsSha256);

  static std::shared_ptr<const PerceptualDistance> shared();

  // Inputs N x 3 x H x W in [0, 1]; returns N distances.
  torch::Tensor operator()(const torch::Tensor& a, const torch::Tensor& b) const;

  static const std::vector<std::string>& taps();

 private:
  std::shared_ptr<const Backbone> backbone_;
  std::vector<torch::Tensor> channel_weights_;
};

std::filesystem::path default_perceptual_weights();

}  // namespace fovrec
