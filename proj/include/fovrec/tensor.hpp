#pragma once

#include <torch/torch.h>

#include "fovrec/image.hpp"

namespace fovrec {

// 1 x 3 x H x W tensor holding the patch values as they are (no range change).
torch::Tensor to_tensor(const ImagePatch& patch, torch::Dtype dtype = torch::kFloat32);
torch::Tensor to_tensor(const Image& img, torch::Dtype dtype = torch::kFloat32);
// Inverse of to_tensor for a single 3-channel image (batch size must be 1).
ImagePatch to_patch(const torch::Tensor& t, RangeTag range = RangeTag::kUnit);
Image to_image(const torch::Tensor& t);

// Stacks unit-range patches of equal size into N x 3 x H x W.
torch::Tensor stack_patches(const std::vector<ImagePatch>& patches,
                            torch::Dtype dtype = torch::kFloat32);

}  // namespace fovrec
