#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fovrec/foveation.hpp"
#include "fovrec/image.hpp"

namespace fovrec {

// y(t) = a + (k - a) / (c + q * exp(-b * t))^(1 / v)
struct LogisticParams {
  double a = 0.0;
  double b = 1.0;
  double c = 1.0;
  double k = 1.0;
  double q = 1.0;
  double v = 1.0;

  double operator()(double t) const;
  // Base of the power is positive and v is nonzero.
  bool defined_at(double t) const;
  // Range of the curve over all scores: between a and the opposite
  // asymptote a + (k - a) c^(-1/v) when c > 0, else between a and k.
  double lower() const { return std::min(a, far_asymptote()); }
  double upper() const { return std::max(a, far_asymptote()); }
  double far_asymptote() const;
};

// Fixed uncalibrated reference 1 / (1 + exp(-t)).
double standard_sigmoid(double t);

struct FitOptions {
  int restarts = 32;
  std::uint64_t seed = 0;
  int max_evaluations = 4000;  // per restart
};

struct LogisticFit {
  LogisticParams params;
  double mse = 0.0;
  int usable_restarts = 0;
};

// Damped least squares (Levenberg-Marquardt) from randomized starting points;
// the restart with the lowest mean squared error wins. Needs >= 6 points.
LogisticFit fit_logistic(const std::vector<double>& scores, const std::vector<double>& probs,
                         const FitOptions& options = {});

// Sample Pearson correlation; 0 when either input is constant.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Calibrated VGG at one eccentricity: the score is a nonnegative combination
// of layer distances fed through the logistic with b fixed to 1 (the weights
// carry the scale).
struct CalVggSlice {
  double eccentricity_deg = 0.0;
  std::vector<double> layer_weights;
  LogisticParams logistic;
  double mse = 0.0;

  double score(const std::vector<double>& distances) const;
  // Logistic output clamped to its own [min(a,k), max(a,k)] and to [0, 1].
  double probability(const std::vector<double>& distances) const;
};

// Joint fit of weights (kept nonnegative by squaring free parameters) and
// logistic. rows[i] holds the layer distances of pair i.
CalVggSlice calibrate_vgg(const std::vector<std::vector<double>>& rows,
                          const std::vector<double>& probs, double eccentricity_deg,
                          const FitOptions& options = {});

struct CalVggModel {
  std::vector<std::string> layers;
  std::vector<CalVggSlice> slices;  // sorted by eccentricity

  // Below the first and above the last slice the end models apply; between
  // them the two end models are blended linearly in eccentricity.
  double predict(const std::vector<double>& distances, double eccentricity_deg) const;

  std::string to_json() const;
  static CalVggModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static CalVggModel load(const std::filesystem::path& path);
};

double predict_patch(const CalVggModel& model, const ImagePatch& ref, const ImagePatch& test,
                     double eccentricity_deg);

// Mean over non-overlapping patch_size tiles (reflect padded at the bottom
// and right edges) of predict_patch at each tile centre's eccentricity. The
// images must match the geometry's resolution.
double predict_full_image(const CalVggModel& model, const ImagePatch& ref, const ImagePatch& test,
                          PixelPoint gaze, const FieldGeometry& geom, int patch_size = 256);

// One calibration datum: metric features (a single score, or layer
// distances) with the measured detection probability.
struct CalibrationItem {
  double eccentricity_deg = 0.0;
  std::vector<double> features;
  double prob = 0.0;
};

using Predictor = std::function<double(const CalibrationItem&)>;
using Fitter = std::function<Predictor(const std::vector<CalibrationItem>&)>;

// Per-eccentricity logistic on features[0].
Fitter logistic_fitter(const FitOptions& options = {});
// Per-eccentricity calibrate_vgg on all features.
Fitter calvgg_fitter(const FitOptions& options = {});
// standard_sigmoid of the feature sum.
Predictor sigmoid_baseline();

struct CrossValidation {
  std::vector<double> fold_r;
  double mean_r = 0.0;
  std::vector<int> fold_of;  // fold index per item
};

// Folds are stratified by eccentricity. Every fold needs >= 3 items.
CrossValidation cross_validate(const std::vector<CalibrationItem>& items, const Fitter& fitter,
                               int k = 5, std::uint64_t seed = 0);

// Same folds as cross_validate with the same seed, scoring a fixed predictor.
CrossValidation cross_validate_fixed(const std::vector<CalibrationItem>& items,
                                     const Predictor& predictor, int k = 5,
                                     std::uint64_t seed = 0);

// Simulated 2AFC observer: p(level) = 0.5 + 0.5 * (1 - exp(-(level / alpha)^beta))
// with alpha chosen so that p(threshold) = 0.75. The threshold grows
// linearly with eccentricity.
struct SyntheticObserver {
  double threshold_at_zero = 0.5;
  double threshold_slope = 0.1;  // per degree
  double beta = 3.0;

  double threshold(double eccentricity_deg) const;
  double probability(double level, double eccentricity_deg) const;
};

// Blur-ladder detection study answered by a SyntheticObserver: random crops
// of each image, blurred at every ladder step, shown at every eccentricity
// for a number of binomial trials.
struct BlurStudy {
  int patch_size = 64;
  int crops_per_image = 2;
  std::vector<double> blur_ladder = {0.25, 1.25, 2.25, 3.25, 4.25};
  std::vector<double> eccentricities = {8.0, 14.0, 20.0};
  int trials = 40;
  SyntheticObserver observer;
  std::uint64_t seed = 0;
};

// Images smaller than the patch size are skipped.
std::vector<CalibrationItem> simulate_blur_study(const std::vector<ImagePatch>& images,
                                                 const BlurStudy& study);

// One calibrated slice per eccentricity present in items, sorted.
CalVggModel fit_calvgg_model(const std::vector<CalibrationItem>& items, const FitOptions& options);

struct SweepScene {
  ImagePatch reference;
  PixelPoint gaze;
  FieldGeometry geom;
};

// Produces the composited test image for a scene at a far-periphery
// boundary, or nullopt when that reconstruction is unavailable.
struct SweepMethod {
  std::string name;
  std::function<std::optional<ImagePatch>(std::size_t scene, double boundary_deg)> render;
};

struct SweepRow {
  std::string method;
  double boundary_deg = 0.0;
  double detection_rate = 0.0;  // mean over scenes
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> missing;  // "<method> @ <boundary>: scene <i>"
};

// A curve point with any missing scene is reported and skipped.
SweepResult sweep_far_boundary(const CalVggModel& model, const std::vector<SweepScene>& scenes,
                               const std::vector<SweepMethod>& methods,
                               const std::vector<double>& boundaries, int patch_size = 256);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
// Rejects malformed files, naming the offending line.
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

}  // namespace fovrec
