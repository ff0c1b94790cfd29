#include "fovrec/backbone.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include <openssl/evp.h>

#include "fovrec/errors.hpp"
#include "fovrec/rng.hpp"

namespace fovrec {

namespace {

std::vector<LayerInfo> make_layers() {
  const int block_convs[5] = {2, 2, 4, 4, 4};
  const int block_channels[5] = {64, 128, 256, 512, 512};
  std::vector<LayerInfo> out;
  int seq = 0;
  for (int b = 0; b < 5; ++b) {
    for (int k = 0; k < block_convs[b]; ++k) {
      const std::string suffix = std::to_string(b + 1) + "_" + std::to_string(k + 1);
      out.push_back({"conv" + suffix, LayerKind::kConv, block_channels[b], seq++});
      out.push_back({"relu" + suffix, LayerKind::kRelu, block_channels[b], seq++});
    }
    out.push_back({"pool" + std::to_string(b + 1), LayerKind::kPool, block_channels[b], seq++});
  }
  return out;
}

std::string key(const BackboneConfig& c) {
  std::ostringstream s;
  s << c.weights_path << '|' << c.weights_sha256 << '|' << c.init_seed << '|'
    << static_cast<int>(c.pooling) << '|' << static_cast<int>(c.dtype);
  return s.str();
}

}  // namespace

const std::vector<LayerInfo>& backbone_layers() {
  static const std::vector<LayerInfo> layers = make_layers();
  return layers;
}

const LayerInfo& backbone_layer(const std::string& name) {
  for (const auto& l : backbone_layers()) {
    if (l.name == name) return l;
  }
  throw ValidationError("unknown backbone layer: " + name);
}

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr);
  }
  void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest, &len);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
      out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::filesystem::path default_weights_path() {
  const char* dir = std::getenv("FOVREC_WEIGHTS_DIR");
  if (dir == nullptr || *dir == '\0') return {};
  const std::filesystem::path p = std::filesystem::path(dir) / "vgg19.pth";
  return std::filesystem::exists(p) ? p : std::filesystem::path{};
}

Backbone::Backbone(const BackboneConfig& config) : config_(config) {
  std::filesystem::path path = config.weights_path;
  if (path.empty()) path = default_weights_path();
  if (path.empty()) {
    init_seeded();
  } else {
    load_state_dict(path);
  }
}

std::shared_ptr<const Backbone> Backbone::shared(const BackboneConfig& config) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const Backbone>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[key(config)];
  if (!slot) slot = std::make_shared<const Backbone>(config);
  return slot;
}

void Backbone::init_seeded() {
  // He-normal weights and small uniform biases, drawn from a portable
  // generator so the network is identical on every platform.
  Rng rng(Rng::derive(config_.init_seed, "backbone"));
  int in_channels = 3;
  for (const auto& layer : backbone_layers()) {
    if (layer.kind != LayerKind::kConv) continue;
    const int out_channels = layer.channels;
    const double sd = std::sqrt(2.0 / (9.0 * in_channels));
    auto w = torch::empty({out_channels, in_channels, 3, 3}, torch::kFloat64);
    double* wp = w.data_ptr<double>();
    for (int64_t i = 0; i < w.numel(); ++i) wp[i] = rng.normal(0.0, sd);
    auto b = torch::empty({out_channels}, torch::kFloat64);
    double* bp = b.data_ptr<double>();
    for (int64_t i = 0; i < b.numel(); ++i) bp[i] = rng.uniform(-0.05, 0.05);
    weights_.push_back(w.to(config_.dtype));
    biases_.push_back(b.to(config_.dtype));
    in_channels = out_channels;
  }
  source_ = "seeded:" + std::to_string(config_.init_seed);
}

void Backbone::load_state_dict(const std::filesystem::path& path) {
  const std::string digest = sha256_file(path);
  if (!config_.weights_sha256.empty() && digest != config_.weights_sha256) {
    throw IoError("checksum mismatch for " + path.string() + ": expected " +
                  config_.weights_sha256 + ", got " + digest);
  }
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  c10::IValue value;
  try {
    value = torch::pickle_load(bytes);
  } catch (const c10::Error& e) {
    throw IoError("cannot parse weight file " + path.string() + ": " + e.what_without_backtrace());
  }
  if (!value.isGenericDict()) throw IoError("weight file is not a state dict: " + path.string());
  const auto dict = value.toGenericDict();
  auto fetch = [&](const std::string& name) {
    for (const auto& item : dict) {
      if (item.key().toStringRef() == name) return item.value().toTensor();
    }
    throw IoError("weight file lacks " + name);
  };
  int in_channels = 3;
  for (const auto& layer : backbone_layers()) {
    if (layer.kind != LayerKind::kConv) continue;
    const std::string prefix = "features." + std::to_string(layer.sequence_index);
    auto w = fetch(prefix + ".weight");
    auto b = fetch(prefix + ".bias");
    if (w.sizes() != torch::IntArrayRef({layer.channels, in_channels, 3, 3}) ||
        b.sizes() != torch::IntArrayRef({layer.channels})) {
      throw IoError("unexpected shape for " + prefix);
    }
    weights_.push_back(w.to(config_.dtype).contiguous());
    biases_.push_back(b.to(config_.dtype).contiguous());
    in_channels = layer.channels;
  }
  source_ = "file:" + digest;
}

void Backbone::save_state_dict(const std::filesystem::path& path) const {
  c10::impl::GenericDict dict(c10::StringType::get(), c10::TensorType::get());
  std::size_t conv = 0;
  for (const auto& layer : backbone_layers()) {
    if (layer.kind != LayerKind::kConv) continue;
    const std::string prefix = "features." + std::to_string(layer.sequence_index);
    dict.insert(prefix + ".weight", weights_[conv].to(torch::kFloat32));
    dict.insert(prefix + ".bias", biases_[conv].to(torch::kFloat32));
    ++conv;
  }
  const std::vector<char> bytes = torch::pickle_save(dict);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::map<std::string, torch::Tensor> Backbone::forward(
    const torch::Tensor& unit_images, const std::vector<std::string>& layers) const {
  if (layers.empty()) throw ValidationError("no backbone layers requested");
  if (unit_images.dim() != 4 || unit_images.size(1) != 3) {
    throw ValidationError("backbone input must be N x 3 x H x W");
  }
  int deepest = -1;
  for (const auto& name : layers) {
    deepest = std::max(deepest, backbone_layer(name).sequence_index);
  }
  const auto opts = torch::TensorOptions().dtype(config_.dtype);
  const auto mean = torch::tensor({kBackboneMean[0], kBackboneMean[1], kBackboneMean[2]}, opts)
                        .view({1, 3, 1, 1});
  const auto sd = torch::tensor({kBackboneStd[0], kBackboneStd[1], kBackboneStd[2]}, opts)
                      .view({1, 3, 1, 1});
  torch::Tensor x = (unit_images.to(config_.dtype) - mean) / sd;

  std::map<std::string, torch::Tensor> out;
  std::size_t conv = 0;
  for (const auto& layer : backbone_layers()) {
    if (layer.sequence_index > deepest) break;
    switch (layer.kind) {
      case LayerKind::kConv:
        x = torch::conv2d(x, weights_[conv], biases_[conv], 1, 1);
        ++conv;
        break;
      case LayerKind::kRelu:
        x = torch::relu(x);
        break;
      case LayerKind::kPool:
        x = config_.pooling == PoolingMode::kMax ? torch::max_pool2d(x, 2, 2)
                                                 : torch::avg_pool2d(x, 2, 2);
        break;
    }
    if (std::find(layers.begin(), layers.end(), layer.name) != layers.end()) out[layer.name] = x;
  }
  return out;
}

}  // namespace fovrec
