#pragma once

#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "fovrec/backbone.hpp"
#include "fovrec/image.hpp"

namespace fovrec {

// First activation of every block.
const std::vector<std::string>& style_layers();

// Activations keyed by layer name, each N x C x H x W.
struct FeatureStack {
  std::vector<std::string> layers;
  std::map<std::string, torch::Tensor> maps;
};

struct GramEntry {
  torch::Tensor gram;  // N x C x C
  int64_t channels = 0;
  int64_t positions = 0;
};

struct GramSet {
  std::vector<std::string> layers;
  std::map<std::string, GramEntry> entries;
};

// input: N x 3 x H x W in [0, 1]; gradients flow back to it.
FeatureStack extract_features(const Backbone& backbone, const torch::Tensor& input,
                              const std::vector<std::string>& layers);
FeatureStack extract_features(const Backbone& backbone, const ImagePatch& img,
                              const std::vector<std::string>& layers);

// G_ij = sum_k F_ik F_jk over spatial positions k.
GramSet gram_matrices(const FeatureStack& feats);

// sum_l w_l sum_ij (A_ij - B_ij)^2 / (4 N_l^2 M_l^2), averaged over the
// batch. An empty weight list means equal weights of 1.
torch::Tensor gram_loss(const GramSet& a, const GramSet& b,
                        const std::vector<double>& layer_weights = {});

}  // namespace fovrec
