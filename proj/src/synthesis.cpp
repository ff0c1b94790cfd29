#include "fovrec/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "fovrec/errors.hpp"
#include "fovrec/features.hpp"
#include "fovrec/filter.hpp"
#include "fovrec/rng.hpp"
#include "fovrec/tensor.hpp"

namespace fovrec {

std::string to_string(SynthesisStrategy s) {
  switch (s) {
    case SynthesisStrategy::kTwoStage: return "A";
    case SynthesisStrategy::kBlurInit: return "B";
    case SynthesisStrategy::kConstrainedOnly: return "constrained";
  }
  return "?";
}

SynthesisStrategy parse_strategy(const std::string& s) {
  if (s == "A" || s == "a" || s == "two-stage") return SynthesisStrategy::kTwoStage;
  if (s == "B" || s == "b" || s == "blur-init") return SynthesisStrategy::kBlurInit;
  if (s == "constrained") return SynthesisStrategy::kConstrainedOnly;
  throw ValidationError("unknown synthesis strategy: " + s);
}

void SynthesisConfig::validate() const {
  if (!(guiding_percent >= 0.0 && guiding_percent <= 100.0)) {
    throw ValidationError("guiding percent must be in [0, 100]");
  }
  if (max_iters < 0 || refine_iters < 0) throw ValidationError("iteration counts must be >= 0");
  if (!(step_size > 0.0)) throw ValidationError("step size must be positive");
  if (!(blur_sigma >= 0.0)) throw ValidationError("blur sigma must be >= 0");
  if (convergence_window < 1) throw ValidationError("convergence window must be >= 1");
}

SamplingMask select_guiding_samples(const ImagePatch& exemplar, double percent,
                                    std::uint64_t seed) {
  if (!(percent >= 0.0 && percent <= 100.0)) {
    throw ValidationError("guiding percent must be in [0, 100]");
  }
  return uniform_random_mask(exemplar.height(), exemplar.width(), percent / 100.0,
                             Rng::derive(seed, "guides"));
}

ImagePatch project_constraint(const ImagePatch& img, const ImagePatch& exemplar,
                              const SamplingMask& mask) {
  if (img.height() != exemplar.height() || img.width() != exemplar.width() ||
      mask.height != img.height() || mask.width != img.width()) {
    throw ValidationError("project_constraint: dimension mismatch");
  }
  const ImagePatch src = exemplar.range() == img.range()
                             ? exemplar
                             : (img.range() == RangeTag::kUnit ? exemplar.to_unit()
                                                               : exemplar.to_signed());
  Image out = img.pixels();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int c = 0; c < 3; ++c) out(y, x, c) = src(y, x, c);
    }
  }
  return ImagePatch(std::move(out), img.range());
}

double checkerboard_energy(const Image& img) {
  if (img.height() < 2 || img.width() < 2) return 0.0;
  double sum = 0.0;
  for (int y = 0; y + 1 < img.height(); ++y) {
    for (int x = 0; x + 1 < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const double r =
            (img(y, x, c) - img(y, x + 1, c) - img(y + 1, x, c) + img(y + 1, x + 1, c)) / 4.0;
        sum += r * r;
      }
    }
  }
  return sum / (static_cast<double>(img.height() - 1) * (img.width() - 1) * img.channels());
}

double checkerboard_energy(const ImagePatch& img) { return checkerboard_energy(img.pixels()); }

namespace {

const std::vector<std::string>& layers_of(const SynthesisConfig& cfg) {
  return cfg.layers.empty() ? style_layers() : cfg.layers;
}

torch::Tensor mask_tensor(const SamplingMask& m) {
  auto t = torch::zeros({1, 1, m.height, m.width});
  auto acc = t.accessor<float, 4>();
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) acc[0][0][y][x] = m.at(y, x) ? 1.0f : 0.0f;
  }
  return t;
}

struct StageResult {
  torch::Tensor best;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Adam on the pixels; after every step the image is clamped to [0, 1] and,
// when a mask is given, the guiding pixels are reset to the exemplar.
StageResult run_stage(const Backbone& net, const GramSet& target, const SynthesisConfig& cfg,
                      torch::Tensor start, const torch::Tensor& mask,
                      const torch::Tensor& exemplar, int iters, std::vector<double>& history) {
  const auto& layers = layers_of(cfg);
  auto project = [&](const torch::Tensor& x) {
    auto y = x.clamp(0.0, 1.0);
    if (mask.defined()) y = y * (1 - mask) + exemplar * mask;
    return y;
  };
  torch::Tensor x = project(start).detach().clone().set_requires_grad(true);
  torch::optim::Adam opt({x}, torch::optim::AdamOptions(cfg.step_size));
  StageResult r;
  r.best = x.detach().clone();
  r.best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> stage_losses;
  for (int it = 0; it <= iters; ++it) {
    opt.zero_grad();
    const auto loss =
        gram_loss(gram_matrices(extract_features(net, x, layers)), target, cfg.layer_weights);
    const double value = loss.item<double>();
    if (!std::isfinite(value)) break;
    if (it == 0) r.initial_loss = value;
    stage_losses.push_back(value);
    history.push_back(value);
    if (value < r.best_loss) {
      r.best_loss = value;
      r.best = x.detach().clone();
    }
    r.iterations = it;
    if (value <= 1e-30) {
      r.converged = true;
      break;
    }
    const int w = cfg.convergence_window;
    if (it >= w) {
      const double before = stage_losses[it - w];
      if ((before - value) / before < cfg.convergence_tol) {
        r.converged = true;
        break;
      }
    }
    if (it == iters) break;
    loss.backward();
    opt.step();
    torch::NoGradGuard guard;
    x.copy_(project(x));
  }
  return r;
}

// Gaussian-weighted average of the guiding samples; pixels with no nearby
// sample take the mean guide colour.
torch::Tensor blurred_guides(const ImagePatch& exemplar, const SamplingMask& mask, double sigma) {
  Image num(exemplar.height(), exemplar.width(), 3);
  Image den(exemplar.height(), exemplar.width(), 1);
  double mean[3] = {0.0, 0.0, 0.0};
  const double count = static_cast<double>(mask.popcount());
  for (int y = 0; y < exemplar.height(); ++y) {
    for (int x = 0; x < exemplar.width(); ++x) {
      if (!mask.at(y, x)) continue;
      den(y, x) = 1.0;
      for (int c = 0; c < 3; ++c) {
        num(y, x, c) = exemplar(y, x, c);
        mean[c] += exemplar(y, x, c) / count;
      }
    }
  }
  const Image bn = gaussian_blur(num, sigma);
  const Image bd = gaussian_blur(den, sigma);
  Image out(exemplar.height(), exemplar.width(), 3);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        out(y, x, c) = bd(y, x) > 1e-6 ? bn(y, x, c) / bd(y, x) : mean[c];
      }
    }
  }
  return to_tensor(out);
}

torch::Tensor uniform_noise(int h, int w, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "synthesis-init"));
  auto t = torch::empty({1, 3, h, w});
  float* p = t.data_ptr<float>();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<float>(rng.uniform());
  return t;
}

}  // namespace

double texture_loss(const ImagePatch& a, const ImagePatch& b, const SynthesisConfig& cfg) {
  const auto net = Backbone::shared(cfg.backbone);
  torch::NoGradGuard guard;
  const auto& layers = layers_of(cfg);
  return gram_loss(gram_matrices(extract_features(*net, a, layers)),
                   gram_matrices(extract_features(*net, b, layers)), cfg.layer_weights)
      .item<double>();
}

SynthesisResult synthesize(const ImagePatch& exemplar_in, const SynthesisConfig& cfg) {
  cfg.validate();
  if (exemplar_in.range() != RangeTag::kUnit) {
    throw ValidationError("synthesize: exemplar must be in unit range");
  }
  const ImagePatch& exemplar = exemplar_in;
  const auto net = Backbone::shared(cfg.backbone);
  const auto& layers = layers_of(cfg);
  const torch::Tensor ex = to_tensor(exemplar, net->dtype());
  GramSet target;
  {
    torch::NoGradGuard guard;
    target = gram_matrices(extract_features(*net, ex, layers));
  }
  const SamplingMask guides = select_guiding_samples(exemplar, cfg.guiding_percent, cfg.seed);
  const torch::Tensor mask = guides.popcount() > 0 ? mask_tensor(guides) : torch::Tensor();
  const int h = exemplar.height(), w = exemplar.width();

  std::vector<double> history;
  SynthesisResult out{exemplar, exemplar, guides, false, 0, 0.0, 0.0, {}};
  switch (cfg.strategy) {
    case SynthesisStrategy::kTwoStage: {
      const StageResult s1 = run_stage(*net, target, cfg, uniform_noise(h, w, cfg.seed), mask, ex,
                                       cfg.max_iters, history);
      const ImagePatch constrained = to_patch(s1.best);
      const ImagePatch blurred = gaussian_blur(constrained, cfg.blur_sigma);
      const StageResult s2 = run_stage(*net, target, cfg, to_tensor(blurred), torch::Tensor(), ex,
                                       cfg.refine_iters, history);
      out.constrained = constrained;
      out.image = to_patch(s2.best);
      out.initial_loss = s1.initial_loss;
      out.final_loss = s2.best_loss;
      out.iterations = s1.iterations + s2.iterations;
      out.converged = s1.converged && s2.converged;
      break;
    }
    case SynthesisStrategy::kBlurInit:
    case SynthesisStrategy::kConstrainedOnly: {
      const bool blur_init =
          cfg.strategy == SynthesisStrategy::kBlurInit && guides.popcount() > 0;
      const torch::Tensor start =
          blur_init ? blurred_guides(exemplar, guides, cfg.blur_sigma) : uniform_noise(h, w, cfg.seed);
      const StageResult s = run_stage(*net, target, cfg, start, mask, ex, cfg.max_iters, history);
      out.image = to_patch(s.best);
      out.constrained = out.image;
      out.initial_loss = s.initial_loss;
      out.final_loss = s.best_loss;
      out.iterations = s.iterations;
      out.converged = s.converged;
      break;
    }
  }
  out.loss_history = std::move(history);
  return out;
}


BatchSummary batch_synthesize(const std::filesystem::path& exemplar_dir,
                              const std::vector<BatchRegion>& regions,
                              const SynthesisConfig& cfg,
                              const std::filesystem::path& manifest_path) {
  cfg.validate();
  const auto files = list_image_files(exemplar_dir);

  DatasetManifest manifest = DatasetManifest::open(manifest_path);
  BatchSummary summary;
  for (const auto& file : files) {
    std::optional<ImagePatch> exemplar;
    try {
      exemplar = read_image(file);
    } catch (const std::exception& e) {
      std::cerr << "skipping " << file.string() << ": " << e.what() << '\n';
      summary.skipped.push_back(file.string());
      continue;
    }
    const std::string stem = file.stem().string();
    const CropRect crop{0, 0, exemplar->width(), exemplar->height()};
    for (const auto& region : regions) {
      const std::string rel = "distorted/" + region.region + "/" + stem + ".png";
      const ManifestEntry* done = manifest.find("distorted", file.filename().string(), crop,
                                                region.region);
      if (done != nullptr && std::filesystem::exists(manifest.resolve(done->patch_path))) continue;
      SynthesisConfig job = cfg;
      job.guiding_percent = region.percent;
      job.seed = Rng::derive(cfg.seed, stem + "/" + region.region);
      const SynthesisResult r = synthesize(*exemplar, job);
      write_png(r.image, manifest.resolve(rel));
      ManifestEntry entry;
      entry.kind = "distorted";
      entry.patch_path = rel;
      entry.source_image = file.filename().string();
      entry.crop = crop;
      entry.region = region.region;
      entry.rate_or_percent = region.percent;
      entry.strategy = to_string(job.strategy);
      entry.seed = job.seed;
      if (done == nullptr) manifest.append(entry);
      ++summary.synthesized;
    }
  }
  summary.entries = manifest.entries();
  return summary;
}

}  // namespace fovrec
