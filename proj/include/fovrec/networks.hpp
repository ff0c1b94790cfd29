#pragma once

#include <vector>

#include <torch/torch.h>

namespace fovrec {

struct GeneratorSpec {
  std::vector<int> encoder_filters = {16, 32, 64, 128, 128};
  // Empty: the first four encoder widths in reverse.
  std::vector<int> decoder_filters;
  int conv_kernel = 5;
  int skip_kernel = 1;
  double leaky_slope = 0.2;

  std::vector<int> resolved_decoder() const;
  void validate() const;
  // Input sides must be multiples of this.
  int stride() const { return 1 << encoder_filters.size(); }
};

struct CriticSpec {
  int patch_size = 64;
  std::vector<int> block_filters = {16, 32, 64, 128, 128};
  int conv_kernel = 5;
  int skip_kernel = 1;
  double leaky_slope = 0.2;

  void validate() const;
};

// Two k x k convolutions with LeakyReLU plus a 1 x 1 projection of the input
// added to the result.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int in_channels, int out_channels, int kernel, int skip_kernel, double slope);
  torch::Tensor forward(const torch::Tensor& x);

  double slope() const { return slope_; }
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};

 private:
  double slope_;
};
TORCH_MODULE(ResidualBlock);

// UNet: residual blocks each followed by 2x average pooling, a bilinear
// upsampling bridge, decoder blocks on [upsampled, skip] concatenations each
// followed by bilinear upsampling, then a 1 x 1 convolution and tanh.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);

  const GeneratorSpec& spec() const { return spec_; }
  torch::nn::ModuleList encoder{nullptr}, decoder{nullptr};
  torch::nn::Conv2d head{nullptr};

 private:
  GeneratorSpec spec_;
};
TORCH_MODULE(Generator);

// PatchGAN-style critic: every patch_size x patch_size tile is scored by
// residual down blocks and a fully connected layer; forward() averages the
// tile scores into one value per image.
class CriticImpl : public torch::nn::Module {
 public:
  explicit CriticImpl(const CriticSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);
  // N x T tile scores in row-major tile order.
  torch::Tensor tile_scores(const torch::Tensor& x);

  const CriticSpec& spec() const { return spec_; }
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::Linear fc{nullptr};

 private:
  CriticSpec spec_;
};
TORCH_MODULE(Critic);

Generator build_generator(const GeneratorSpec& spec);
Critic build_critic(const CriticSpec& spec);

int64_t parameter_count(torch::nn::Module& m);

}  // namespace fovrec
