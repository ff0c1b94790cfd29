#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fovrec/calibration.hpp"
#include "fovrec/datasets.hpp"
#include "fovrec/foveation.hpp"
#include "fovrec/synthesis.hpp"
#include "fovrec/training.hpp"

namespace fovrec {

struct PipelineSeeds {
  std::uint64_t dataset = 1;
  std::uint64_t critic = 2;
  std::uint64_t train = 3;
  std::uint64_t masks = 4;
  std::uint64_t calibration = 5;
};

struct PipelineConfig {
  std::filesystem::path images = FOVREC_DATA_DIR "/images";
  std::filesystem::path work_dir = "fovrec-run";
  std::string cohort = "expert";
  // Replaces the cohort's percentages when non-empty (eccentricity -> percent).
  std::map<int, double> threshold_override;

  RegionPartition partition;  // gaze is ignored; runs gaze at each image centre
  // Physical width at which a test image is shown, and the viewing distance.
  double display_width_m = 0.46;
  double viewing_distance_m = 0.70;

  double near_rate = 0.12;
  double far_rate = 0.007;

  int patch_size = 256;
  int generator_patches = 1000;
  int critic_patches = 1000;
  SynthesisConfig synthesis;  // guiding percent and seed are set per job

  TrainConfig train;  // variant, region and seed are set per model
  std::vector<std::string> variants = {"l2", "l2*"};

  int test_images = 10;
  int eval_patch_size = 64;
  std::vector<double> boundaries = {9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22};

  int calibration_patch_size = 64;
  int calibration_crops = 2;  // per test image
  std::vector<double> blur_ladder = {0.25, 1.25, 2.25, 3.25, 4.25};
  std::vector<double> calibration_eccentricities = {8, 14, 20};
  int observer_trials = 40;
  SyntheticObserver observer;
  int calibration_restarts = 32;
  int folds = 5;

  PipelineSeeds seeds;

  DistortionThresholds thresholds() const;
  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

// Defaults, then each JSON file in order (merge patch), then "a.b.c=value"
// overrides (value parsed as JSON, else taken as a string).
PipelineConfig layered_config(const std::vector<std::filesystem::path>& files,
                              const std::vector<std::string>& overrides);

struct StageReport {
  std::string name;
  std::string status;  // ok | failed | skipped
  std::string error;
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<std::string> artifacts;  // relative to the work directory
};

struct RunReport {
  std::string config_sha256;
  PipelineSeeds seeds;
  std::vector<StageReport> stages;

  nlohmann::json to_json() const;
};

// build-dataset -> train -> reconstruct -> composite -> calibrate ->
// evaluate -> plot, inside cfg.work_dir (held under a lock file). The report
// is written to work_dir/report.json after every stage. A failing stage is
// recorded, later stages are marked skipped, and the error is rethrown with
// the stage name prefixed and its original type kept.
RunReport run_end_to_end(const PipelineConfig& cfg);

}  // namespace fovrec
