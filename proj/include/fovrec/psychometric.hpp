#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace fovrec {

struct PsychometricRecord {
  double eccentricity_deg = 0.0;
  double level = 0.0;  // guiding percent or blur sigma
  int detections = 0;
  int trials = 0;

  double probability() const { return static_cast<double>(detections) / trials; }
  void validate() const;
};

// Detection probability as a cubic in the stimulus level.
struct CubicFit {
  std::array<double, 4> coeffs{};  // c0 + c1 x + c2 x^2 + c3 x^3
  double eccentricity_deg = 0.0;
  double level_min = 0.0;
  double level_max = 0.0;
  double residual_mse = 0.0;

  double operator()(double level) const;
};

// Unweighted least squares over the per-record probabilities. Needs at least
// four distinct levels.
CubicFit fit_cubic(const std::vector<PsychometricRecord>& records);

// Smallest level in [level_min, level_max] where the cubic equals prob, or
// nullopt if it never does.
std::optional<double> threshold_at(const CubicFit& fit, double prob = 0.75);

// Maps a record set to a statistic; nullopt marks a failed fit.
using ThresholdFitter = std::function<std::optional<double>(const std::vector<PsychometricRecord>&)>;

// fit_cubic followed by threshold_at(prob).
ThresholdFitter cubic_threshold_fitter(double prob = 0.75);

struct BootstrapInterval {
  double estimate = 0.0;  // statistic on the original records
  double lower = 0.0;
  double upper = 0.0;
  int resamples = 0;  // successful resamples
  int failures = 0;
};

// Percentile interval. Every resample redraws each record's trial outcomes
// with replacement. Failed resamples are dropped and counted; more than 20 %
// failures raise ConvergenceError.
BootstrapInterval bootstrap_ci(const std::vector<PsychometricRecord>& records,
                               const ThresholdFitter& fitter, double level = 0.95,
                               int n_boot = 1000, std::uint64_t seed = 0);

// Binomial records at the given levels with detection probability
// truth(level).
std::vector<PsychometricRecord> simulate_records(const std::function<double(double)>& truth,
                                                 const std::vector<double>& levels, int trials,
                                                 double eccentricity_deg, std::uint64_t seed);

}  // namespace fovrec
