#include "fovrec/psychometric.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "fovrec/errors.hpp"
#include "fovrec/rng.hpp"

namespace fovrec {

void PsychometricRecord::validate() const {
  if (trials <= 0) throw ValidationError("record needs trials > 0");
  if (detections < 0 || detections > trials) {
    throw ValidationError("record needs 0 <= detections <= trials");
  }
  if (!std::isfinite(level) || !std::isfinite(eccentricity_deg)) {
    throw ValidationError("record level and eccentricity must be finite");
  }
}

double CubicFit::operator()(double x) const {
  return ((coeffs[3] * x + coeffs[2]) * x + coeffs[1]) * x + coeffs[0];
}

CubicFit fit_cubic(const std::vector<PsychometricRecord>& records) {
  std::set<double> levels;
  for (const auto& r : records) {
    r.validate();
    levels.insert(r.level);
  }
  if (levels.size() < 4) {
    throw ValidationError("cubic fit needs at least 4 distinct levels, got " +
                          std::to_string(levels.size()));
  }
  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = records[i].level;
    a.row(i) << 1.0, x, x * x, x * x * x;
    y(i) = records[i].probability();
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
  CubicFit fit;
  for (int k = 0; k < 4; ++k) fit.coeffs[k] = c(k);
  fit.eccentricity_deg = records.front().eccentricity_deg;
  fit.level_min = *levels.begin();
  fit.level_max = *levels.rbegin();
  fit.residual_mse = (a * c - y).squaredNorm() / static_cast<double>(n);
  return fit;
}

namespace {

// Root of f on [lo, hi] where f changes sign (or vanishes at an end).
double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::optional<double> threshold_at(const CubicFit& fit, double prob) {
  auto f = [&](double x) { return fit(x) - prob; };
  // Split the range at the critical points so every piece is monotone.
  std::vector<double> cuts = {fit.level_min};
  const double a = 3 * fit.coeffs[3], b = 2 * fit.coeffs[2], c = fit.coeffs[1];
  std::vector<double> crit;
  if (a != 0.0) {
    const double disc = b * b - 4 * a * c;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      crit = {(-b - s) / (2 * a), (-b + s) / (2 * a)};
    }
  } else if (b != 0.0) {
    crit = {-c / b};
  }
  std::sort(crit.begin(), crit.end());
  for (double x : crit) {
    if (x > fit.level_min && x < fit.level_max) cuts.push_back(x);
  }
  cuts.push_back(fit.level_max);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if ((flo < 0.0) != (fhi < 0.0) || fhi == 0.0) return bisect(f, lo, hi);
  }
  return std::nullopt;
}

ThresholdFitter cubic_threshold_fitter(double prob) {
  return [prob](const std::vector<PsychometricRecord>& r) -> std::optional<double> {
    return threshold_at(fit_cubic(r), prob);
  };
}

namespace {

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

}  // namespace

BootstrapInterval bootstrap_ci(const std::vector<PsychometricRecord>& records,
                               const ThresholdFitter& fitter, double level, int n_boot,
                               std::uint64_t seed) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  if (n_boot < 1) throw ValidationError("n_boot must be >= 1");
  for (const auto& r : records) r.validate();
  const auto estimate = fitter(records);
  if (!estimate) throw ConvergenceError("statistic undefined on the original records");

  Rng rng(Rng::derive(seed, "bootstrap"));
  std::vector<double> values;
  values.reserve(n_boot);
  int failures = 0;
  std::vector<PsychometricRecord> sample = records;
  for (int b = 0; b < n_boot; ++b) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      // Drawing trials with replacement from d hits out of n.
      int hits = 0;
      for (int t = 0; t < records[i].trials; ++t) {
        if (static_cast<int>(rng.uniform_index(records[i].trials)) < records[i].detections) ++hits;
      }
      sample[i].detections = hits;
    }
    std::optional<double> v;
    try {
      v = fitter(sample);
    } catch (const ValidationError&) {
      v.reset();
    } catch (const ConvergenceError&) {
      v.reset();
    }
    if (v && std::isfinite(*v)) {
      values.push_back(*v);
    } else {
      ++failures;
    }
  }
  if (failures * 5 > n_boot) {
    throw ConvergenceError(std::to_string(failures) + " of " + std::to_string(n_boot) +
                           " bootstrap resamples failed");
  }
  std::sort(values.begin(), values.end());
  BootstrapInterval out;
  out.estimate = *estimate;
  out.lower = percentile(values, (1.0 - level) / 2.0);
  out.upper = percentile(values, 1.0 - (1.0 - level) / 2.0);
  out.resamples = static_cast<int>(values.size());
  out.failures = failures;
  return out;
}

std::vector<PsychometricRecord> simulate_records(const std::function<double(double)>& truth,
                                                 const std::vector<double>& levels, int trials,
                                                 double eccentricity_deg, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("trials must be >= 1");
  Rng rng(Rng::derive(seed, "observer"));
  std::vector<PsychometricRecord> out;
  for (double x : levels) {
    const double p = std::clamp(truth(x), 0.0, 1.0);
    int hits = 0;
    for (int t = 0; t < trials; ++t) hits += rng.uniform() < p ? 1 : 0;
    out.push_back({eccentricity_deg, x, hits, trials});
  }
  return out;
}

}  // namespace fovrec
