#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fovrec/backbone.hpp"
#include "fovrec/image.hpp"
#include "fovrec/manifest.hpp"
#include "fovrec/sampling.hpp"

namespace fovrec {

enum class SynthesisStrategy {
  kTwoStage,         // "A": constrained from noise, blur, unconstrained refinement
  kBlurInit,         // "B": start from blurred guides, constrained throughout
  kConstrainedOnly,  // constrained from noise with no artifact mitigation
};

std::string to_string(SynthesisStrategy s);
SynthesisStrategy parse_strategy(const std::string& s);

inline BackboneConfig average_pooling_backbone() {
  BackboneConfig c;
  c.pooling = PoolingMode::kAverage;
  return c;
}

struct SynthesisConfig {
  double guiding_percent = 0.0;
  SynthesisStrategy strategy = SynthesisStrategy::kTwoStage;
  int max_iters = 1000;       // constrained stage
  int refine_iters = 500;     // unconstrained second stage of kTwoStage
  double step_size = 0.02;
  double blur_sigma = 1.0;
  std::uint64_t seed = 0;
  double convergence_tol = 1e-4;
  int convergence_window = 50;
  std::vector<std::string> layers;     // empty: style_layers()
  std::vector<double> layer_weights;   // empty: equal
  // Average pooling gives smoother gradients for pixel optimization.
  BackboneConfig backbone = average_pooling_backbone();

  void validate() const;
};

struct SynthesisResult {
  ImagePatch image;
  // Constrained-stage output before blurring (kTwoStage), else equal to image.
  ImagePatch constrained;
  SamplingMask guides;
  bool converged = false;
  int iterations = 0;
  double initial_loss = 0.0;  // loss of the run's starting image
  double final_loss = 0.0;
  std::vector<double> loss_history;
};

// Uniform random pixels without replacement: round(p / 100 * H * W).
SamplingMask select_guiding_samples(const ImagePatch& exemplar, double percent,
                                    std::uint64_t seed);

// Exemplar values at mask positions, img elsewhere.
ImagePatch project_constraint(const ImagePatch& img, const ImagePatch& exemplar,
                              const SamplingMask& mask);

// Texture synthesis matching Gram statistics of the exemplar with guiding
// pixels held fixed. Output stays in [0, 1]. Reaching max_iters without
// meeting the tolerance clears `converged` and still returns the best iterate.
SynthesisResult synthesize(const ImagePatch& exemplar, const SynthesisConfig& cfg);

// Gram loss between two images over the configured layers.
double texture_loss(const ImagePatch& a, const ImagePatch& b, const SynthesisConfig& cfg);

// Mean squared response to [[1, -1], [-1, 1]] / 4 over valid 2x2 windows,
// averaged over channels.
double checkerboard_energy(const Image& img);
double checkerboard_energy(const ImagePatch& img);

struct BatchRegion {
  std::string region;  // "near" or "far"
  double percent;
};

struct BatchSummary {
  std::vector<ManifestEntry> entries;  // all entries now in the manifest, in order
  std::vector<std::string> skipped;    // exemplars that could not be read
  int synthesized = 0;                 // jobs run in this call
};

// One distorted patch per (exemplar, region), written under
// <manifest dir>/distorted/<region>/. Jobs already recorded in the manifest
// with an existing file are skipped, so an interrupted run can be resumed.
BatchSummary batch_synthesize(const std::filesystem::path& exemplar_dir,
                              const std::vector<BatchRegion>& regions,
                              const SynthesisConfig& cfg,
                              const std::filesystem::path& manifest_path);

}  // namespace fovrec
