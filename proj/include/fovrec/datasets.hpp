#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "fovrec/manifest.hpp"
#include "fovrec/synthesis.hpp"

namespace fovrec {

// Guiding-sample percentages at which synthesized distortions become
// detectable, by eccentricity in degrees, for one observer cohort.
struct DistortionThresholds {
  std::string cohort;
  std::map<int, double> percent;
  std::map<int, std::pair<double, double>> ci95;

  static DistortionThresholds expert();
  static DistortionThresholds naive();
  static DistortionThresholds for_cohort(const std::string& cohort);

  // Percent at a tabulated eccentricity; throws ValidationError otherwise.
  double at(int eccentricity_deg) const;
  // Requires entries for 8 and 14 degrees and strictly decreasing values.
  void validate() const;
};

struct GeneratorDatasetConfig {
  int n_patches = 1000;
  int patch_size = 256;
  double near_rate = 0.12;
  double far_rate = 0.007;
  std::uint64_t seed = 0;
};

// Crops n_patches patches with random offsets, balanced across the source
// images, and writes for every crop and region a natural entry and a
// densified_input entry (void-and-cluster subsampling, then pull-push
// densification). Output goes below out_dir; the manifest is
// out_dir/generator.jsonl. Sources smaller than the patch are skipped with a
// warning. Existing entries are kept, so interrupted builds can be resumed.
DatasetManifest build_generator_dataset(const std::filesystem::path& image_dir,
                                        const std::filesystem::path& out_dir,
                                        const GeneratorDatasetConfig& cfg);

struct CriticDatasetConfig {
  int n_patches = 1000;
  int patch_size = 256;
  DistortionThresholds thresholds = DistortionThresholds::expert();
  SynthesisConfig synthesis;  // guiding_percent and seed are set per job
  std::uint64_t seed = 0;
};

// Crops n_patches pristine patches into out_dir/pristine, synthesizes a
// distorted version of each at thresholds[8] for the near region and
// thresholds[14] for the far region, and lists every pristine patch once per
// region as a natural entry. The manifest is out_dir/critic.jsonl.
DatasetManifest build_critic_dataset(const std::filesystem::path& image_dir,
                                     const std::filesystem::path& out_dir,
                                     const CriticDatasetConfig& cfg);

}  // namespace fovrec
