#include "fovrec/calibration.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include <Eigen/Dense>
#include <json.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

#include "fovrec/errors.hpp"
#include "fovrec/filter.hpp"
#include "fovrec/metrics.hpp"
#include "fovrec/rng.hpp"

namespace fovrec {

using nlohmann::json;

double LogisticParams::operator()(double t) const {
  return a + (k - a) / std::pow(c + q * std::exp(-b * t), 1.0 / v);
}

bool LogisticParams::defined_at(double t) const {
  const double base = c + q * std::exp(-b * t);
  return v != 0.0 && std::isfinite(base) && base > 0.0;
}

double LogisticParams::far_asymptote() const {
  if (!(c > 0.0) || v == 0.0) return k;
  const double y = a + (k - a) * std::pow(c, -1.0 / v);
  return std::isfinite(y) ? y : k;
}

double standard_sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

namespace {

// Residuals and Jacobian of a least-squares problem, evaluated together.
struct Problem {
  int n_params;
  int n_values;
  // Returns false where the model is undefined.
  std::function<bool(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*)> eval;
};

constexpr double kInfeasibleResidual = 1e3;

struct Functor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const Problem* p;
  int inputs() const { return p->n_params; }
  int values() const { return p->n_values; }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    if (!p->eval(x, r, nullptr)) r.setConstant(kInfeasibleResidual);
    return 0;
  }
  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    Eigen::VectorXd r(p->n_values);
    if (!p->eval(x, r, &j)) j.setZero();
    return 0;
  }
};

// Minimizes from x (in place); returns the mean squared residual or +inf.
double run_lm(const Problem& problem, Eigen::VectorXd& x, int max_evaluations) {
  Functor f{&problem};
  Eigen::LevenbergMarquardt<Functor> lm(f);
  lm.parameters.maxfev = max_evaluations;
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-14;
  lm.minimize(x);
  Eigen::VectorXd r(problem.n_values);
  if (!problem.eval(x, r, nullptr) || !r.allFinite()) return std::numeric_limits<double>::infinity();
  return r.squaredNorm() / problem.n_values;
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1))];
}

// Value and derivatives of the logistic with respect to (a, c, k, q, v) and
// its argument t, at b = params.b.
struct LogisticEval {
  double y, da, db, dc, dk, dq, dv, dt;
};

// Fits stay where c, q and v are positive: the curve is then defined and
// monotone for every score, including scores outside the fitted range.
std::optional<LogisticEval> eval_logistic(const LogisticParams& p, double t) {
  if (!(p.c > 0.0 && p.q > 0.0 && p.v > 1e-8)) return std::nullopt;
  const double e = std::exp(-p.b * t);
  const double d = p.c + p.q * e;
  if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
  const double pw = std::pow(d, -1.0 / p.v);
  const double dpw_dd = (-1.0 / p.v) * pw / d;
  const double span = p.k - p.a;
  LogisticEval out;
  out.y = p.a + span * pw;
  out.da = 1.0 - pw;
  out.dk = pw;
  out.dc = span * dpw_dd;
  out.dq = span * dpw_dd * e;
  out.db = span * dpw_dd * p.q * e * (-t);
  out.dt = span * dpw_dd * p.q * e * (-p.b);
  out.dv = span * pw * std::log(d) / (p.v * p.v);
  if (!std::isfinite(out.y)) return std::nullopt;
  return out;
}

void check_pairs(std::size_t n_scores, std::size_t n_probs, std::size_t min_points) {
  if (n_scores != n_probs) throw ValidationError("scores and probabilities differ in length");
  if (n_scores < min_points) {
    throw ValidationError("fit needs at least " + std::to_string(min_points) + " points, got " +
                          std::to_string(n_scores));
  }
}

}  // namespace

LogisticFit fit_logistic(const std::vector<double>& scores, const std::vector<double>& probs,
                         const FitOptions& options) {
  check_pairs(scores.size(), probs.size(), 6);
  const int n = static_cast<int>(scores.size());
  Problem problem{6, n, [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
                    const LogisticParams p{x(0), x(1), x(2), x(3), x(4), x(5)};
                    for (int i = 0; i < n; ++i) {
                      const auto e = eval_logistic(p, scores[i]);
                      if (!e) return false;
                      r(i) = e->y - probs[i];
                      if (j) j->row(i) << e->da, e->db, e->dc, e->dk, e->dq, e->dv;
                    }
                    return true;
                  }};

  const auto [smin, smax] = std::minmax_element(scores.begin(), scores.end());
  const auto [pmin, pmax] = std::minmax_element(probs.begin(), probs.end());
  const double spread = std::max(*smax - *smin, 1e-12);
  Rng rng(Rng::derive(options.seed, "logistic"));
  LogisticFit best;
  best.mse = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    const double b = (r % 2 == 0 ? 1.0 : -1.0) * log_uniform(rng, 0.5, 50.0) / spread;
    const double c = log_uniform(rng, 0.3, 3.0);
    const double t0 = quantile_of(scores, rng.uniform(0.1, 0.9));
    Eigen::VectorXd x(6);
    x << *pmin + rng.uniform(-0.05, 0.05), b, c, *pmax + rng.uniform(-0.05, 0.05),
        c * std::exp(b * t0), log_uniform(rng, 0.2, 5.0);
    const double err = run_lm(problem, x, options.max_evaluations);
    if (!std::isfinite(err)) continue;
    ++best.usable_restarts;
    if (err < best.mse) {
      best.mse = err;
      best.params = {x(0), x(1), x(2), x(3), x(4), x(5)};
    }
  }
  if (best.usable_restarts == 0) {
    throw ConvergenceError("logistic fit: all " + std::to_string(options.restarts) +
                           " restarts ended outside the model's domain");
  }
  return best;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ValidationError("pearson needs two equal-length series of >= 2 values");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double CalVggSlice::score(const std::vector<double>& distances) const {
  if (distances.size() != layer_weights.size()) {
    throw ValidationError("expected " + std::to_string(layer_weights.size()) +
                          " layer distances, got " + std::to_string(distances.size()));
  }
  double t = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) t += layer_weights[i] * distances[i];
  return t;
}

double CalVggSlice::probability(const std::vector<double>& distances) const {
  const double t = score(distances);
  double p = logistic.defined_at(t) ? logistic(t) : logistic.lower();
  if (!std::isfinite(p)) p = logistic.lower();
  p = std::clamp(p, logistic.lower(), logistic.upper());
  return std::clamp(p, 0.0, 1.0);
}

CalVggSlice calibrate_vgg(const std::vector<std::vector<double>>& rows,
                          const std::vector<double>& probs, double eccentricity_deg,
                          const FitOptions& options) {
  if (rows.empty()) throw ValidationError("calibrate_vgg: no data");
  const int n_layers = static_cast<int>(rows.front().size());
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != n_layers) throw ValidationError("ragged layer distances");
  }
  check_pairs(rows.size(), probs.size(), 6);
  const int n = static_cast<int>(rows.size());
  // x = (a, c, k, q, v, u_1..u_L) with layer weight u_j^2.
  Problem problem{5 + n_layers, n,
                  [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
                    const LogisticParams p{x(0), 1.0, x(1), x(2), x(3), x(4)};
                    for (int i = 0; i < n; ++i) {
                      double t = 0.0;
                      for (int l = 0; l < n_layers; ++l) t += x(5 + l) * x(5 + l) * rows[i][l];
                      const auto e = eval_logistic(p, t);
                      if (!e) return false;
                      r(i) = e->y - probs[i];
                      if (j) {
                        j->coeffRef(i, 0) = e->da;
                        j->coeffRef(i, 1) = e->dc;
                        j->coeffRef(i, 2) = e->dk;
                        j->coeffRef(i, 3) = e->dq;
                        j->coeffRef(i, 4) = e->dv;
                        for (int l = 0; l < n_layers; ++l) {
                          j->coeffRef(i, 5 + l) = e->dt * 2.0 * x(5 + l) * rows[i][l];
                        }
                      }
                    }
                    return true;
                  }};

  std::vector<double> layer_mean(n_layers, 0.0);
  for (const auto& r : rows) {
    for (int l = 0; l < n_layers; ++l) layer_mean[l] += r[l] / n;
  }
  const auto [pmin, pmax] = std::minmax_element(probs.begin(), probs.end());
  Rng rng(Rng::derive(options.seed, "calvgg"));
  CalVggSlice best;
  best.eccentricity_deg = eccentricity_deg;
  best.mse = std::numeric_limits<double>::infinity();
  int usable = 0;
  for (int r = 0; r < options.restarts; ++r) {
    const double scale = log_uniform(rng, 0.3, 30.0);
    Eigen::VectorXd x(5 + n_layers);
    std::vector<double> t(n, 0.0);
    for (int l = 0; l < n_layers; ++l) {
      const double w = layer_mean[l] > 0.0 ? scale * rng.uniform(0.5, 1.5) / (n_layers * layer_mean[l])
                                           : 0.0;
      x(5 + l) = std::sqrt(w);
      for (int i = 0; i < n; ++i) t[i] += w * rows[i][l];
    }
    const double c = log_uniform(rng, 0.3, 3.0);
    const double t0 = quantile_of(t, rng.uniform(0.1, 0.9));
    x(0) = *pmin + rng.uniform(-0.05, 0.05);
    x(1) = c;
    x(2) = *pmax + rng.uniform(-0.05, 0.05);
    x(3) = c * std::exp(t0);
    x(4) = log_uniform(rng, 0.2, 5.0);
    const double err = run_lm(problem, x, options.max_evaluations);
    if (!std::isfinite(err)) continue;
    ++usable;
    if (err < best.mse) {
      best.mse = err;
      best.logistic = {x(0), 1.0, x(1), x(2), x(3), x(4)};
      best.layer_weights.assign(n_layers, 0.0);
      for (int l = 0; l < n_layers; ++l) best.layer_weights[l] = x(5 + l) * x(5 + l);
    }
  }
  if (usable == 0) throw ConvergenceError("calibrate_vgg: every restart failed");
  return best;
}

double CalVggModel::predict(const std::vector<double>& distances, double eccentricity_deg) const {
  if (slices.empty()) throw ValidationError("calibrated model has no slices");
  const CalVggSlice& lo = slices.front();
  const CalVggSlice& hi = slices.back();
  if (slices.size() == 1 || eccentricity_deg <= lo.eccentricity_deg) {
    return lo.probability(distances);
  }
  if (eccentricity_deg >= hi.eccentricity_deg) return hi.probability(distances);
  const double w = (eccentricity_deg - lo.eccentricity_deg) / (hi.eccentricity_deg - lo.eccentricity_deg);
  return std::clamp((1.0 - w) * lo.probability(distances) + w * hi.probability(distances), 0.0, 1.0);
}

std::string CalVggModel::to_json() const {
  json j;
  j["layers"] = layers;
  j["slices"] = json::array();
  for (const auto& s : slices) {
    const auto& p = s.logistic;
    j["slices"].push_back({{"eccentricity_deg", s.eccentricity_deg},
                           {"layer_weights", s.layer_weights},
                           {"logistic", {{"a", p.a}, {"b", p.b}, {"c", p.c}, {"k", p.k},
                                         {"q", p.q}, {"v", p.v}}},
                           {"mse", s.mse}});
  }
  return j.dump(2);
}

CalVggModel CalVggModel::from_json(const std::string& text) {
  CalVggModel m;
  try {
    const json j = json::parse(text);
    m.layers = j.at("layers").get<std::vector<std::string>>();
    for (const auto& s : j.at("slices")) {
      CalVggSlice slice;
      slice.eccentricity_deg = s.at("eccentricity_deg").get<double>();
      slice.layer_weights = s.at("layer_weights").get<std::vector<double>>();
      const auto& p = s.at("logistic");
      slice.logistic = {p.at("a").get<double>(), p.at("b").get<double>(), p.at("c").get<double>(),
                        p.at("k").get<double>(), p.at("q").get<double>(), p.at("v").get<double>()};
      slice.mse = s.value("mse", 0.0);
      if (slice.layer_weights.size() != m.layers.size()) {
        throw ValidationError("slice weight count does not match the layer list");
      }
      for (double w : slice.layer_weights) {
        if (w < 0.0) throw ValidationError("calibrated layer weights must be nonnegative");
      }
      m.slices.push_back(std::move(slice));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed calibrated model: ") + e.what());
  }
  std::sort(m.slices.begin(), m.slices.end(),
            [](const auto& x, const auto& y) { return x.eccentricity_deg < y.eccentricity_deg; });
  return m;
}

void CalVggModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << to_json() << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

CalVggModel CalVggModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

double predict_patch(const CalVggModel& model, const ImagePatch& ref, const ImagePatch& test,
                     double eccentricity_deg) {
  if (eccentricity_deg < 0.0) throw ValidationError("eccentricity must be >= 0");
  return model.predict(layer_distances(ref, test), eccentricity_deg);
}

namespace {

Image reflect_pad(const Image& img, int height, int width) {
  Image out(height, width, img.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = reflect_index(y, img.height());
    for (int x = 0; x < width; ++x) {
      const int sx = reflect_index(x, img.width());
      for (int c = 0; c < img.channels(); ++c) out(y, x, c) = img(sy, sx, c);
    }
  }
  return out;
}

}  // namespace

namespace {

// Layer distances of earlier tiles, keyed by scene, tile and test content.
using TileCache = std::unordered_map<std::uint64_t, std::vector<double>>;

std::uint64_t tile_key(std::uint64_t scene, int tile, const Image& test) {
  const auto bytes = test.data();
  const std::string_view view(reinterpret_cast<const char*>(bytes.data()),
                              bytes.size() * sizeof(double));
  std::uint64_t h = std::hash<std::string_view>{}(view);
  h ^= Rng::derive(scene, "tile/" + std::to_string(tile)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

double full_image_score(const CalVggModel& model, const ImagePatch& ref, const ImagePatch& test,
                        PixelPoint gaze, const FieldGeometry& geom, int patch_size,
                        TileCache* cache, std::uint64_t scene) {
  if (ref.height() != test.height() || ref.width() != test.width()) {
    throw ValidationError("reference and test images differ in size");
  }
  if (ref.height() < patch_size || ref.width() < patch_size) {
    throw ValidationError("image smaller than one " + std::to_string(patch_size) + " px patch");
  }
  if (geom.width_px != ref.width() || geom.height_px != ref.height()) {
    throw ValidationError("image size does not match the display geometry");
  }
  const int ph = (ref.height() + patch_size - 1) / patch_size * patch_size;
  const int pw = (ref.width() + patch_size - 1) / patch_size * patch_size;
  const Image r = reflect_pad(ref.to_unit().pixels(), ph, pw);
  const Image t = reflect_pad(test.to_unit().pixels(), ph, pw);

  std::vector<double> ecc;
  std::vector<std::vector<double>> dist;
  std::vector<ImagePatch> todo_ref, todo_test;
  std::vector<std::size_t> todo_slot;
  std::vector<std::uint64_t> todo_key;
  int tile = 0;
  for (int y = 0; y < ph; y += patch_size) {
    for (int x = 0; x < pw; x += patch_size, ++tile) {
      ecc.push_back(pixel_eccentricity(geom, gaze, {x + patch_size / 2.0, y + patch_size / 2.0}));
      Image rt = crop(r, y, x, patch_size, patch_size);
      Image tt = crop(t, y, x, patch_size, patch_size);
      dist.emplace_back();
      if (std::equal(rt.data().begin(), rt.data().end(), tt.data().begin())) {
        dist.back().assign(model.layers.size(), 0.0);
        continue;
      }
      const std::uint64_t key = cache ? tile_key(scene, tile, tt) : 0;
      if (cache) {
        const auto hit = cache->find(key);
        if (hit != cache->end()) {
          dist.back() = hit->second;
          continue;
        }
      }
      todo_ref.emplace_back(std::move(rt));
      todo_test.emplace_back(std::move(tt));
      todo_slot.push_back(dist.size() - 1);
      todo_key.push_back(key);
    }
  }
  const auto computed = layer_distances(todo_ref, todo_test);
  for (std::size_t i = 0; i < computed.size(); ++i) {
    dist[todo_slot[i]] = computed[i];
    if (cache) cache->emplace(todo_key[i], computed[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (ecc[i] < 0.0) throw ValidationError("eccentricity must be >= 0");
    sum += model.predict(dist[i], ecc[i]);
  }
  return sum / static_cast<double>(dist.size());
}

}  // namespace

double predict_full_image(const CalVggModel& model, const ImagePatch& ref, const ImagePatch& test,
                          PixelPoint gaze, const FieldGeometry& geom, int patch_size) {
  return full_image_score(model, ref, test, gaze, geom, patch_size, nullptr, 0);
}

namespace {

Fitter per_eccentricity(
    const std::function<Predictor(const std::vector<CalibrationItem>&)>& fit_group) {
  return [fit_group](const std::vector<CalibrationItem>& train) -> Predictor {
    std::map<double, std::vector<CalibrationItem>> groups;
    for (const auto& it : train) groups[it.eccentricity_deg].push_back(it);
    std::map<double, Predictor> models;
    for (const auto& [ecc, items] : groups) models[ecc] = fit_group(items);
    return [models](const CalibrationItem& it) {
      const auto m = models.find(it.eccentricity_deg);
      if (m == models.end()) {
        throw ValidationError("no calibration at eccentricity " +
                              std::to_string(it.eccentricity_deg));
      }
      return m->second(it);
    };
  };
}

}  // namespace

Fitter logistic_fitter(const FitOptions& options) {
  return per_eccentricity([options](const std::vector<CalibrationItem>& items) -> Predictor {
    std::vector<double> t, p;
    for (const auto& it : items) {
      t.push_back(it.features.at(0));
      p.push_back(it.prob);
    }
    const LogisticParams params = fit_logistic(t, p, options).params;
    return [params](const CalibrationItem& it) {
      const double t = it.features.at(0);
      const double y = params.defined_at(t) ? params(t) : params.lower();
      return std::clamp(std::clamp(y, params.lower(), params.upper()), 0.0, 1.0);
    };
  });
}

Fitter calvgg_fitter(const FitOptions& options) {
  return per_eccentricity([options](const std::vector<CalibrationItem>& items) -> Predictor {
    std::vector<std::vector<double>> rows;
    std::vector<double> p;
    for (const auto& it : items) {
      rows.push_back(it.features);
      p.push_back(it.prob);
    }
    const CalVggSlice slice = calibrate_vgg(rows, p, items.front().eccentricity_deg, options);
    return [slice](const CalibrationItem& it) { return slice.probability(it.features); };
  });
}

Predictor sigmoid_baseline() {
  return [](const CalibrationItem& it) {
    return standard_sigmoid(std::accumulate(it.features.begin(), it.features.end(), 0.0));
  };
}

namespace {

std::vector<int> assign_folds(const std::vector<CalibrationItem>& items, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs k >= 2");
  if (static_cast<int>(items.size()) < 3 * k) {
    throw ValidationError("cross-validation with k=" + std::to_string(k) +
                          " needs at least 3 items per fold");
  }
  std::map<double, std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(items.size()); ++i) {
    groups[items[i].eccentricity_deg].push_back(i);
  }
  Rng rng(Rng::derive(seed, "folds"));
  std::vector<int> fold_of(items.size(), 0);
  int next = 0;
  for (auto& [ecc, idx] : groups) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    for (int i : idx) fold_of[i] = next++ % k;
  }
  return fold_of;
}

CrossValidation score_folds(const std::vector<CalibrationItem>& items, const std::vector<int>& fold_of,
                            int k, const std::function<Predictor(int fold)>& predictor_for) {
  CrossValidation cv;
  cv.fold_of = fold_of;
  for (int f = 0; f < k; ++f) {
    const Predictor predict = predictor_for(f);
    std::vector<double> pred, truth;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (fold_of[i] != f) continue;
      pred.push_back(predict(items[i]));
      truth.push_back(items[i].prob);
    }
    cv.fold_r.push_back(pearson(pred, truth));
  }
  cv.mean_r = std::accumulate(cv.fold_r.begin(), cv.fold_r.end(), 0.0) / k;
  return cv;
}

}  // namespace

CrossValidation cross_validate(const std::vector<CalibrationItem>& items, const Fitter& fitter,
                               int k, std::uint64_t seed) {
  const auto fold_of = assign_folds(items, k, seed);
  return score_folds(items, fold_of, k, [&](int f) {
    std::vector<CalibrationItem> train;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (fold_of[i] != f) train.push_back(items[i]);
    }
    return fitter(train);
  });
}

CrossValidation cross_validate_fixed(const std::vector<CalibrationItem>& items,
                                     const Predictor& predictor, int k, std::uint64_t seed) {
  return score_folds(items, assign_folds(items, k, seed), k, [&](int) { return predictor; });
}

double SyntheticObserver::threshold(double eccentricity_deg) const {
  return threshold_at_zero + threshold_slope * eccentricity_deg;
}

double SyntheticObserver::probability(double level, double eccentricity_deg) const {
  if (level <= 0.0) return 0.5;
  const double alpha = threshold(eccentricity_deg) / std::pow(std::log(2.0), 1.0 / beta);
  return 0.5 + 0.5 * (1.0 - std::exp(-std::pow(level / alpha, beta)));
}

std::vector<CalibrationItem> simulate_blur_study(const std::vector<ImagePatch>& images,
                                                 const BlurStudy& study) {
  if (study.patch_size < 1 || study.crops_per_image < 1 || study.trials < 1) {
    throw ValidationError("blur study needs positive patch size, crop count and trials");
  }
  if (study.blur_ladder.empty() || study.eccentricities.empty()) {
    throw ValidationError("blur study needs a ladder and eccentricities");
  }
  const int p = study.patch_size;
  Rng trials(Rng::derive(study.seed, "observer"));
  std::vector<CalibrationItem> items;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImagePatch& img = images[i];
    if (img.height() < p || img.width() < p) continue;
    for (int k = 0; k < study.crops_per_image; ++k) {
      Rng rng(Rng::derive(study.seed, "crop/" + std::to_string(i) + "/" + std::to_string(k)));
      const int y = static_cast<int>(rng.uniform_index(img.height() - p + 1));
      const int x = static_cast<int>(rng.uniform_index(img.width() - p + 1));
      const ImagePatch ref(crop(img.pixels(), y, x, p, p));
      for (double sigma : study.blur_ladder) {
        const auto d = layer_distances(ref, gaussian_blur(ref, sigma));
        for (double ecc : study.eccentricities) {
          const double prob = study.observer.probability(sigma, ecc);
          int hits = 0;
          for (int t = 0; t < study.trials; ++t) hits += trials.uniform() < prob ? 1 : 0;
          items.push_back({ecc, d, static_cast<double>(hits) / study.trials});
        }
      }
    }
  }
  if (items.empty()) throw ValidationError("no image is large enough for the study patch size");
  return items;
}

CalVggModel fit_calvgg_model(const std::vector<CalibrationItem>& items, const FitOptions& options) {
  std::set<double> eccs;
  for (const auto& it : items) eccs.insert(it.eccentricity_deg);
  if (eccs.empty()) throw ValidationError("no calibration items");
  CalVggModel model;
  model.layers = calvgg_layers();
  for (double ecc : eccs) {
    std::vector<std::vector<double>> rows;
    std::vector<double> probs;
    for (const auto& it : items) {
      if (it.eccentricity_deg != ecc) continue;
      rows.push_back(it.features);
      probs.push_back(it.prob);
    }
    model.slices.push_back(calibrate_vgg(rows, probs, ecc, options));
  }
  return model;
}

SweepResult sweep_far_boundary(const CalVggModel& model, const std::vector<SweepScene>& scenes,
                               const std::vector<SweepMethod>& methods,
                               const std::vector<double>& boundaries, int patch_size) {
  if (scenes.empty()) throw ValidationError("sweep needs at least one scene");
  SweepResult out;
  TileCache cache;
  for (const auto& m : methods) {
    for (double b : boundaries) {
      double sum = 0.0;
      bool complete = true;
      for (std::size_t s = 0; s < scenes.size(); ++s) {
        const auto img = m.render(s, b);
        if (!img) {
          std::ostringstream msg;
          msg << m.name << " @ " << b << ": scene " << s;
          out.missing.push_back(msg.str());
          std::cerr << "missing reconstruction: " << msg.str() << '\n';
          complete = false;
          break;
        }
        sum += full_image_score(model, scenes[s].reference, *img, scenes[s].gaze, scenes[s].geom,
                                patch_size, &cache, s);
      }
      if (complete) out.rows.push_back({m.name, b, sum / static_cast<double>(scenes.size())});
    }
  }
  return out;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out.precision(12);
  out << "method,boundary_deg,detection_rate\n";
  for (const auto& r : rows) out << r.method << ',' << r.boundary_deg << ',' << r.detection_rate << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "method,boundary_deg,detection_rate") {
    throw ValidationError(path.string() + ":1: expected header method,boundary_deg,detection_rate");
  }
  std::vector<SweepRow> rows;
  for (int n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string method, b, r;
    const bool ok = std::getline(ss, method, ',') && std::getline(ss, b, ',') && std::getline(ss, r);
    SweepRow row;
    try {
      if (!ok || method.empty() || r.find(',') != std::string::npos) throw std::invalid_argument(line);
      std::size_t used_b = 0, used_r = 0;
      row = {method, std::stod(b, &used_b), std::stod(r, &used_r)};
      if (used_b != b.size() || used_r != r.size()) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": malformed row '" + line + "'");
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw ValidationError(path.string() + ": no data rows");
  return rows;
}

}  // namespace fovrec
