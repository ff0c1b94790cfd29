#include "fovrec/features.hpp"

#include "fovrec/errors.hpp"
#include "fovrec/tensor.hpp"

namespace fovrec {

const std::vector<std::string>& style_layers() {
  static const std::vector<std::string> layers = {"relu1_1", "relu2_1", "relu3_1", "relu4_1",
                                                  "relu5_1"};
  return layers;
}

FeatureStack extract_features(const Backbone& backbone, const torch::Tensor& input,
                              const std::vector<std::string>& layers) {
  FeatureStack out;
  out.layers = layers;
  out.maps = backbone.forward(input, layers);
  return out;
}

FeatureStack extract_features(const Backbone& backbone, const ImagePatch& img,
                              const std::vector<std::string>& layers) {
  return extract_features(backbone, to_tensor(img.to_unit(), backbone.dtype()), layers);
}

GramSet gram_matrices(const FeatureStack& feats) {
  GramSet out;
  out.layers = feats.layers;
  for (const auto& name : feats.layers) {
    const auto it = feats.maps.find(name);
    if (it == feats.maps.end()) throw ValidationError("feature stack lacks layer " + name);
    const torch::Tensor& f = it->second;
    const int64_t n = f.size(0), c = f.size(1), m = f.size(2) * f.size(3);
    const auto flat = f.reshape({n, c, m});
    out.entries[name] = {torch::bmm(flat, flat.transpose(1, 2)), c, m};
  }
  return out;
}

torch::Tensor gram_loss(const GramSet& a, const GramSet& b,
                        const std::vector<double>& layer_weights) {
  if (a.layers != b.layers) throw ValidationError("gram_loss: layer sets differ");
  if (!layer_weights.empty() && layer_weights.size() != a.layers.size()) {
    throw ValidationError("gram_loss: one weight per layer required");
  }
  torch::Tensor total;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const GramEntry& ga = a.entries.at(a.layers[l]);
    const GramEntry& gb = b.entries.at(b.layers[l]);
    if (ga.channels != gb.channels || ga.positions != gb.positions) {
      throw ValidationError("gram_loss: shape mismatch at layer " + a.layers[l]);
    }
    const double w = layer_weights.empty() ? 1.0 : layer_weights[l];
    const double norm = 4.0 * static_cast<double>(ga.channels * ga.channels) *
                        static_cast<double>(ga.positions) * static_cast<double>(ga.positions);
    const auto term = (ga.gram - gb.gram).pow(2).sum({1, 2}).mean() * (w / norm);
    total = total.defined() ? total + term : term;
  }
  return total;
}

}  // namespace fovrec
