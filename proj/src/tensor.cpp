#include "fovrec/tensor.hpp"

#include <string>

#include "fovrec/errors.hpp"

namespace fovrec {

torch::Tensor to_tensor(const Image& img, torch::Dtype dtype) {
  auto t = torch::empty({1, img.channels(), img.height(), img.width()}, torch::kFloat64);
  auto acc = t.accessor<double, 4>();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) acc[0][c][y][x] = img(y, x, c);
    }
  }
  return t.to(dtype);
}

torch::Tensor to_tensor(const ImagePatch& patch, torch::Dtype dtype) {
  return to_tensor(patch.pixels(), dtype);
}

Image to_image(const torch::Tensor& t) {
  if (t.dim() != 4 || t.size(0) != 1) {
    throw ValidationError("expected a 1 x C x H x W tensor, got " + std::to_string(t.dim()) +
                          " dims");
  }
  const auto d = t.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  const int c = static_cast<int>(d.size(1)), h = static_cast<int>(d.size(2)),
            w = static_cast<int>(d.size(3));
  Image img(h, w, c);
  auto acc = d.accessor<double, 4>();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) img(y, x, k) = acc[0][k][y][x];
    }
  }
  return img;
}

ImagePatch to_patch(const torch::Tensor& t, RangeTag range) {
  if (t.dim() != 4 || t.size(1) != 3) throw ValidationError("expected a 3-channel image tensor");
  return ImagePatch(to_image(t), range);
}

torch::Tensor stack_patches(const std::vector<ImagePatch>& patches, torch::Dtype dtype) {
  if (patches.empty()) throw ValidationError("stack_patches: empty list");
  std::vector<torch::Tensor> parts;
  parts.reserve(patches.size());
  for (const auto& p : patches) {
    if (p.height() != patches[0].height() || p.width() != patches[0].width()) {
      throw ValidationError("stack_patches: patch sizes differ");
    }
    parts.push_back(to_tensor(p.to_unit(), dtype));
  }
  return torch::cat(parts, 0);
}

}  // namespace fovrec
