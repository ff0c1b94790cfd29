#include "fovrec/networks.hpp"

#include <string>

#include "fovrec/errors.hpp"

namespace fovrec {

namespace F = torch::nn::functional;

std::vector<int> GeneratorSpec::resolved_decoder() const {
  if (!decoder_filters.empty()) return decoder_filters;
  std::vector<int> d(encoder_filters.begin(), encoder_filters.end() - 1);
  return {d.rbegin(), d.rend()};
}

void GeneratorSpec::validate() const {
  if (encoder_filters.size() < 2) throw ValidationError("generator needs >= 2 encoder blocks");
  if (resolved_decoder().size() != encoder_filters.size() - 1) {
    throw ValidationError("generator needs one decoder block per encoder block but the last");
  }
  for (int f : encoder_filters) {
    if (f <= 0) throw ValidationError("filter counts must be positive");
  }
  for (int f : resolved_decoder()) {
    if (f <= 0) throw ValidationError("filter counts must be positive");
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0 || skip_kernel < 1 || skip_kernel % 2 == 0) {
    throw ValidationError("kernel sizes must be odd and positive");
  }
}

void CriticSpec::validate() const {
  if (block_filters.empty()) throw ValidationError("critic needs at least one block");
  const int stride = 1 << block_filters.size();
  if (patch_size < stride || patch_size % stride != 0) {
    throw ValidationError("critic patch size " + std::to_string(patch_size) +
                          " must be a positive multiple of " + std::to_string(stride));
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0 || skip_kernel < 1 || skip_kernel % 2 == 0) {
    throw ValidationError("kernel sizes must be odd and positive");
  }
}

ResidualBlockImpl::ResidualBlockImpl(int in_channels, int out_channels, int kernel,
                                     int skip_kernel, double slope)
    : slope_(slope) {
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, kernel)
                                     .padding(kernel / 2)));
  conv2 = register_module(
      "conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, kernel)
                                     .padding(kernel / 2)));
  skip = register_module(
      "skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, skip_kernel)
                                    .padding(skip_kernel / 2)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  const auto act = F::LeakyReLUFuncOptions().negative_slope(slope_);
  return F::leaky_relu(conv2(F::leaky_relu(conv1(x), act)), act) + skip(x);
}

namespace {

torch::Tensor upsample2(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

GeneratorImpl::GeneratorImpl(const GeneratorSpec& spec) : spec_(spec) {
  spec_.validate();
  encoder = register_module("encoder", torch::nn::ModuleList());
  decoder = register_module("decoder", torch::nn::ModuleList());
  int c = 3;
  for (int f : spec_.encoder_filters) {
    encoder->push_back(ResidualBlock(c, f, spec_.conv_kernel, spec_.skip_kernel, spec_.leaky_slope));
    c = f;
  }
  const auto dec = spec_.resolved_decoder();
  const int n = static_cast<int>(spec_.encoder_filters.size());
  for (std::size_t j = 0; j < dec.size(); ++j) {
    const int skip_channels = spec_.encoder_filters[n - 2 - j];
    decoder->push_back(ResidualBlock(c + skip_channels, dec[j], spec_.conv_kernel,
                                     spec_.skip_kernel, spec_.leaky_slope));
    c = dec[j];
  }
  head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 3, 1)));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& input) {
  if (input.dim() != 4 || input.size(1) != 3) {
    throw ValidationError("generator input must be N x 3 x H x W");
  }
  const int stride = spec_.stride();
  if (input.size(2) % stride != 0 || input.size(3) % stride != 0) {
    throw ValidationError("generator input sides must be multiples of " + std::to_string(stride));
  }
  std::vector<torch::Tensor> skips;
  torch::Tensor x = input;
  for (const auto& block : *encoder) {
    x = F::avg_pool2d(block->as<ResidualBlock>()->forward(x), F::AvgPool2dFuncOptions(2));
    skips.push_back(x);
  }
  x = upsample2(x);
  const int n = static_cast<int>(skips.size());
  int j = 0;
  for (const auto& block : *decoder) {
    x = block->as<ResidualBlock>()->forward(torch::cat({x, skips[n - 2 - j]}, 1));
    x = upsample2(x);
    ++j;
  }
  return torch::tanh(head(x));
}

CriticImpl::CriticImpl(const CriticSpec& spec) : spec_(spec) {
  spec_.validate();
  blocks = register_module("blocks", torch::nn::ModuleList());
  int c = 3;
  for (int f : spec_.block_filters) {
    blocks->push_back(ResidualBlock(c, f, spec_.conv_kernel, spec_.skip_kernel, spec_.leaky_slope));
    c = f;
  }
  const int side = spec_.patch_size >> spec_.block_filters.size();
  fc = register_module("fc", torch::nn::Linear(c * side * side, 1));
}

torch::Tensor CriticImpl::tile_scores(const torch::Tensor& x) {
  const int p = spec_.patch_size;
  if (x.dim() != 4 || x.size(1) != 3) throw ValidationError("critic input must be N x 3 x H x W");
  if (x.size(2) % p != 0 || x.size(3) % p != 0) {
    throw ValidationError("critic input " + std::to_string(x.size(2)) + "x" +
                          std::to_string(x.size(3)) + " does not tile into " + std::to_string(p) +
                          "x" + std::to_string(p) + " patches");
  }
  const int64_t n = x.size(0);
  auto t = x.unfold(2, p, p).unfold(3, p, p).permute({0, 2, 3, 1, 4, 5}).reshape({-1, 3, p, p});
  for (const auto& block : *blocks) {
    t = F::avg_pool2d(block->as<ResidualBlock>()->forward(t), F::AvgPool2dFuncOptions(2));
  }
  return fc(t.flatten(1)).view({n, -1});
}

torch::Tensor CriticImpl::forward(const torch::Tensor& x) { return tile_scores(x).mean(1); }

Generator build_generator(const GeneratorSpec& spec) { return Generator(spec); }
Critic build_critic(const CriticSpec& spec) { return Critic(spec); }

int64_t parameter_count(torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

}  // namespace fovrec
