#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace fovrec {

enum class PoolingMode { kMax, kAverage };

// Where the 19-layer backbone weights come from. An empty weights_path looks
// for vgg19.pth in $FOVREC_WEIGHTS_DIR; if nothing is found the network is
// initialized deterministically from init_seed.
struct BackboneConfig {
  std::string weights_path;
  std::string weights_sha256;
  std::uint64_t init_seed = 0x76676731390aULL;
  PoolingMode pooling = PoolingMode::kMax;
  torch::Dtype dtype = torch::kFloat32;
};

enum class LayerKind { kConv, kRelu, kPool };

struct LayerInfo {
  std::string name;   // conv1_1, relu1_1, ..., pool5
  LayerKind kind;
  int channels;       // output channels
  int sequence_index; // position in the torchvision "features" sequence
};

// The 37 layers of the 19-layer network in forward order.
const std::vector<LayerInfo>& backbone_layers();
const LayerInfo& backbone_layer(const std::string& name);

// Per-channel normalization applied before the first convolution.
inline constexpr double kBackboneMean[3] = {0.485, 0.456, 0.406};
inline constexpr double kBackboneStd[3] = {0.229, 0.224, 0.225};

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

// Immutable after construction; forward passes do not mutate state, so one
// instance can be shared by concurrent callers.
class Backbone {
 public:
  explicit Backbone(const BackboneConfig& config);

  // Process-wide instance per configuration.
  static std::shared_ptr<const Backbone> shared(const BackboneConfig& config = {});

  // Activations of the requested layers for an N x 3 x H x W unit-range
  // input. Runs only as deep as the deepest requested layer.
  std::map<std::string, torch::Tensor> forward(const torch::Tensor& unit_images,
                                               const std::vector<std::string>& layers) const;

  const BackboneConfig& config() const { return config_; }
  // "file:<sha256>" or "seeded:<seed>".
  const std::string& weights_source() const { return source_; }
  torch::Dtype dtype() const { return config_.dtype; }

  // torchvision-style state dict ("features.<i>.weight" / ".bias").
  void save_state_dict(const std::filesystem::path& path) const;

 private:
  void init_seeded();
  void load_state_dict(const std::filesystem::path& path);

  BackboneConfig config_;
  std::string source_;
  std::vector<torch::Tensor> weights_;  // one per conv, in order
  std::vector<torch::Tensor> biases_;
};

// Resolves the weight file that a default configuration would use, if any.
std::filesystem::path default_weights_path();

}  // namespace fovrec
