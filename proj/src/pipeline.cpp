#include "fovrec/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include "fovrec/backbone.hpp"
#include "fovrec/errors.hpp"
#include "fovrec/filter.hpp"
#include "fovrec/metrics.hpp"
#include "fovrec/plot.hpp"
#include "fovrec/rng.hpp"
#include "fovrec/sampling.hpp"

namespace fovrec {

using nlohmann::json;

DistortionThresholds PipelineConfig::thresholds() const {
  DistortionThresholds t = DistortionThresholds::for_cohort(cohort);
  if (!threshold_override.empty()) {
    t.percent = threshold_override;
    t.ci95.clear();
  }
  return t;
}

void PipelineConfig::validate() const {
  thresholds().validate();
  partition.validate();
  if (!(display_width_m > 0.0 && viewing_distance_m > 0.0)) {
    throw ValidationError("display width and viewing distance must be positive");
  }
  for (double r : {near_rate, far_rate}) {
    if (!(r > 0.0 && r <= 1.0)) throw ValidationError("sampling rates must lie in (0, 1]");
  }
  if (generator_patches < 1 || critic_patches < 1 || test_images < 1) {
    throw ValidationError("patch and image counts must be positive");
  }
  if (patch_size % train.critic.patch_size != 0) {
    throw ValidationError("training patch size must be a multiple of the critic patch size");
  }
  if (patch_size % train.generator.stride() != 0) {
    throw ValidationError("training patch size must be a multiple of the generator stride");
  }
  if (variants.empty()) throw ValidationError("no loss variants selected");
  for (const auto& v : variants) parse_loss_variant(v);
  if (boundaries.empty()) throw ValidationError("no sweep boundaries");
  for (double b : boundaries) {
    if (!(b > partition.near_boundary_deg)) {
      throw ValidationError("sweep boundaries must exceed the near boundary");
    }
  }
  if (blur_ladder.size() < 2 || calibration_eccentricities.empty()) {
    throw ValidationError("calibration needs a blur ladder and eccentricities");
  }
  synthesis.validate();
  TrainConfig t = train;
  t.variant = parse_loss_variant(variants.front());
  t.validate();
}

json PipelineConfig::to_json() const {
  json j;
  j["paths"] = {{"images", images.string()}, {"work_dir", work_dir.string()}};
  j["cohort"] = cohort;
  json over = json::object();
  for (const auto& [ecc, p] : threshold_override) over[std::to_string(ecc)] = p;
  j["threshold_override"] = over;
  j["partition"] = {{"near_boundary_deg", partition.near_boundary_deg},
                    {"far_boundary_deg", partition.far_boundary_deg},
                    {"blend_band_deg", partition.blend_band_deg}};
  j["display"] = {{"width_m", display_width_m}, {"viewing_distance_m", viewing_distance_m}};
  j["rates"] = {{"near", near_rate}, {"far", far_rate}};
  j["datasets"] = {{"patch_size", patch_size},
                   {"generator_patches", generator_patches},
                   {"critic_patches", critic_patches}};
  j["synthesis"] = {{"strategy", to_string(synthesis.strategy)},
                    {"max_iters", synthesis.max_iters},
                    {"refine_iters", synthesis.refine_iters},
                    {"step_size", synthesis.step_size},
                    {"blur_sigma", synthesis.blur_sigma},
                    {"convergence_tol", synthesis.convergence_tol},
                    {"convergence_window", synthesis.convergence_window}};
  j["train"] = json::parse(train.to_json());
  j["train"].erase("variant");
  j["train"].erase("region");
  j["train"].erase("seed");
  j["variants"] = variants;
  j["evaluation"] = {{"test_images", test_images},
                     {"patch_size", eval_patch_size},
                     {"boundaries", boundaries}};
  j["calibration"] = {{"patch_size", calibration_patch_size},
                      {"crops_per_image", calibration_crops},
                      {"blur_ladder", blur_ladder},
                      {"eccentricities", calibration_eccentricities},
                      {"observer_trials", observer_trials},
                      {"observer",
                       {{"threshold_at_zero", observer.threshold_at_zero},
                        {"threshold_slope", observer.threshold_slope},
                        {"beta", observer.beta}}},
                      {"restarts", calibration_restarts},
                      {"folds", folds}};
  j["seeds"] = {{"dataset", seeds.dataset},         {"critic", seeds.critic},
                {"train", seeds.train},             {"masks", seeds.masks},
                {"calibration", seeds.calibration}};
  return j;
}

namespace {

// Rejects keys that the defaults do not have, so typos surface early.
void check_keys(const json& given, const json& known, const std::string& where) {
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!known.contains(key)) throw ValidationError("unknown config key: " + path);
    if (path == "threshold_override") continue;
    if (value.is_object() && known.at(key).is_object()) check_keys(value, known.at(key), path);
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& in) {
  const PipelineConfig defaults;
  json j = defaults.to_json();
  check_keys(in, j, "");
  j.merge_patch(in);
  PipelineConfig c;
  try {
    c.images = j.at("paths").at("images").get<std::string>();
    c.work_dir = j.at("paths").at("work_dir").get<std::string>();
    c.cohort = j.at("cohort").get<std::string>();
    for (const auto& [ecc, p] : j.at("threshold_override").items()) {
      c.threshold_override[std::stoi(ecc)] = p.get<double>();
    }
    const auto& part = j.at("partition");
    c.partition.near_boundary_deg = part.at("near_boundary_deg").get<double>();
    c.partition.far_boundary_deg = part.at("far_boundary_deg").get<double>();
    c.partition.blend_band_deg = part.at("blend_band_deg").get<double>();
    c.display_width_m = j.at("display").at("width_m").get<double>();
    c.viewing_distance_m = j.at("display").at("viewing_distance_m").get<double>();
    c.near_rate = j.at("rates").at("near").get<double>();
    c.far_rate = j.at("rates").at("far").get<double>();
    const auto& ds = j.at("datasets");
    c.patch_size = ds.at("patch_size").get<int>();
    c.generator_patches = ds.at("generator_patches").get<int>();
    c.critic_patches = ds.at("critic_patches").get<int>();
    const auto& sy = j.at("synthesis");
    c.synthesis.strategy = parse_strategy(sy.at("strategy").get<std::string>());
    c.synthesis.max_iters = sy.at("max_iters").get<int>();
    c.synthesis.refine_iters = sy.at("refine_iters").get<int>();
    c.synthesis.step_size = sy.at("step_size").get<double>();
    c.synthesis.blur_sigma = sy.at("blur_sigma").get<double>();
    c.synthesis.convergence_tol = sy.at("convergence_tol").get<double>();
    c.synthesis.convergence_window = sy.at("convergence_window").get<int>();
    c.train = TrainConfig::from_json(j.at("train").dump());
    c.variants = j.at("variants").get<std::vector<std::string>>();
    const auto& ev = j.at("evaluation");
    c.test_images = ev.at("test_images").get<int>();
    c.eval_patch_size = ev.at("patch_size").get<int>();
    c.boundaries = ev.at("boundaries").get<std::vector<double>>();
    const auto& ca = j.at("calibration");
    c.calibration_patch_size = ca.at("patch_size").get<int>();
    c.calibration_crops = ca.at("crops_per_image").get<int>();
    c.blur_ladder = ca.at("blur_ladder").get<std::vector<double>>();
    c.calibration_eccentricities = ca.at("eccentricities").get<std::vector<double>>();
    c.observer_trials = ca.at("observer_trials").get<int>();
    c.observer.threshold_at_zero = ca.at("observer").at("threshold_at_zero").get<double>();
    c.observer.threshold_slope = ca.at("observer").at("threshold_slope").get<double>();
    c.observer.beta = ca.at("observer").at("beta").get<double>();
    c.calibration_restarts = ca.at("restarts").get<int>();
    c.folds = ca.at("folds").get<int>();
    const auto& s = j.at("seeds");
    c.seeds = {s.at("dataset").get<std::uint64_t>(), s.at("critic").get<std::uint64_t>(),
               s.at("train").get<std::uint64_t>(), s.at("masks").get<std::uint64_t>(),
               s.at("calibration").get<std::uint64_t>()};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
  return c;
}

PipelineConfig layered_config(const std::vector<std::filesystem::path>& files,
                              const std::vector<std::string>& overrides) {
  json j = json::object();
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw IoError("cannot read config " + f.string());
    try {
      j.merge_patch(json::parse(in));
    } catch (const json::parse_error& e) {
      throw ValidationError("config " + f.string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("override must look like key.path=value: " + o);
    }
    const std::string key = o.substr(0, eq), raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json::json_pointer ptr;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      ptr /= key.substr(start, dot - start);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    j[ptr] = value;
  }
  PipelineConfig c = PipelineConfig::from_json(j);
  c.validate();
  return c;
}

json RunReport::to_json() const {
  json j;
  j["config_sha256"] = config_sha256;
  j["seeds"] = {{"dataset", seeds.dataset}, {"critic", seeds.critic}, {"train", seeds.train},
                {"masks", seeds.masks},     {"calibration", seeds.calibration}};
  j["stages"] = json::array();
  for (const auto& s : stages) {
    json e = {{"name", s.name}, {"status", s.status}, {"metrics", s.metrics},
              {"artifacts", s.artifacts}};
    if (!s.error.empty()) e["error"] = s.error;
    j["stages"].push_back(e);
  }
  return j;
}

namespace {

class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir) : path_(dir / ".fovrec.lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      throw IoError("work directory is locked by another run (remove " + path_.string() +
                    " if stale)");
    }
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct Scene {
  std::string stem;
  ImagePatch ref;
  FieldGeometry geom;
  PixelPoint gaze;
};

struct Reconstruction {
  ImagePatch near;
  ImagePatch far;
};

struct RunState {
  std::optional<DatasetManifest> generator_set;
  std::optional<DatasetManifest> critic_set;
  std::map<std::string, std::filesystem::path> checkpoints;  // "<variant>/<region>"
  std::vector<Scene> scenes;
  std::vector<std::string> methods;  // in report order
  std::map<std::string, std::vector<Reconstruction>> recon;
  std::optional<CalVggModel> model;
};

std::string dir_name(const std::string& variant) {
  std::string out = variant;
  if (!out.empty() && out.back() == '*') out = out.substr(0, out.size() - 1) + "-ours";
  return out;
}

bool needs_critic_set(const PipelineConfig& cfg) {
  for (const auto& v : cfg.variants) {
    if (parse_loss_variant(v).adv == AdvMode::kOurs) return true;
  }
  return false;
}

std::string rel(const PipelineConfig& cfg, const std::filesystem::path& p) {
  return std::filesystem::relative(p, cfg.work_dir).generic_string();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ImagePatch composite_at(const Scene& s, const Reconstruction& r, const RegionPartition& base,
                        double far_boundary) {
  RegionPartition part = base;
  part.gaze = s.gaze;
  part.far_boundary_deg = far_boundary;
  return composite_foveated(s.ref, r.near, r.far, partition_weights(s.geom, part));
}

void stage_build_dataset(const PipelineConfig& cfg, RunState& st, StageReport& rep) {
  GeneratorDatasetConfig g;
  g.n_patches = cfg.generator_patches;
  g.patch_size = cfg.patch_size;
  g.near_rate = cfg.near_rate;
  g.far_rate = cfg.far_rate;
  g.seed = cfg.seeds.dataset;
  st.generator_set = build_generator_dataset(cfg.images, cfg.work_dir / "datasets" / "generator", g);
  rep.metrics["generator_entries"] = st.generator_set->entries().size();
  rep.metrics["densified_near"] = st.generator_set->select("densified_input", "near").size();
  rep.metrics["densified_far"] = st.generator_set->select("densified_input", "far").size();
  rep.metrics["near_rate"] = cfg.near_rate;
  rep.metrics["far_rate"] = cfg.far_rate;
  rep.artifacts.push_back(rel(cfg, st.generator_set->path()));
}

void stage_synthesize(const PipelineConfig& cfg, RunState& st, StageReport& rep) {
  const DistortionThresholds thr = cfg.thresholds();
  rep.metrics["near_percent"] = thr.at(8);
  rep.metrics["far_percent"] = thr.at(14);
  if (!needs_critic_set(cfg)) {
    rep.metrics["note"] = "no selected variant uses the distorted critic set";
    return;
  }
  CriticDatasetConfig c;
  c.n_patches = cfg.critic_patches;
  c.patch_size = cfg.patch_size;
  c.thresholds = thr;
  c.synthesis = cfg.synthesis;
  c.seed = cfg.seeds.critic;
  st.critic_set = build_critic_dataset(cfg.images, cfg.work_dir / "datasets" / "critic", c);
  rep.metrics["distorted_near"] = st.critic_set->select("distorted", "near").size();
  rep.metrics["distorted_far"] = st.critic_set->select("distorted", "far").size();
  rep.metrics["pristine_near"] = st.critic_set->select("natural", "near").size();
  rep.artifacts.push_back(rel(cfg, st.critic_set->path()));
}

void stage_train(const PipelineConfig& cfg, RunState& st, StageReport& rep) {
  for (const auto& name : cfg.variants) {
    for (const char* region : {"near", "far"}) {
      TrainConfig tc = cfg.train;
      tc.variant = parse_loss_variant(name);
      tc.region = region;
      tc.seed = Rng::derive(cfg.seeds.train, name + "/" + region);
      const TrainingData data = load_training_data(*st.generator_set, st.critic_set, tc);
      const auto dir = cfg.work_dir / "models" / dir_name(name) / region;
      std::filesystem::remove_all(dir);
      const TrainResult r = train(data, tc, dir, false);
      const std::string key = name + "/" + region;
      st.checkpoints[key] = r.checkpoint;
      rep.metrics[key] = {{"steps", r.steps},
                          {"plateaued", r.plateaued},
                          {"first_recon_term", r.history.front().recon_term},
                          {"last_recon_term", r.history.back().recon_term},
                          {"last_gen_loss", r.history.back().gen_loss},
                          {"last_critic_loss", r.history.back().critic_loss}};
      rep.artifacts.push_back(rel(cfg, r.checkpoint));
      rep.artifacts.push_back(rel(cfg, dir / "history.csv"));
    }
  }
}

void stage_reconstruct(const PipelineConfig& cfg, RunState& st, StageReport& rep) {
  const auto files = list_image_files(cfg.images);
  std::map<std::pair<int, int>, RankMatrix> ranks;
  std::vector<Reconstruction> densified;
  for (const auto& f : files) {
    if (static_cast<int>(st.scenes.size()) == cfg.test_images) break;
    ImagePatch ref = read_image(f);
    if (ref.height() < cfg.eval_patch_size || ref.width() < cfg.eval_patch_size) continue;
    Scene s{f.stem().string(), ref, {}, {(ref.width() - 1) / 2.0, (ref.height() - 1) / 2.0}};
    s.geom.width_px = ref.width();
    s.geom.height_px = ref.height();
    s.geom.physical_width_m = cfg.display_width_m;
    s.geom.viewing_distance_m = cfg.viewing_distance_m;
    const auto key = std::make_pair(ref.height(), ref.width());
    if (!ranks.count(key)) {
      ranks.emplace(key, void_and_cluster_ranks(ref.height(), ref.width(), cfg.seeds.masks));
    }
    Rng shift(Rng::derive(cfg.seeds.masks, "shift/" + s.stem));
    const int sy = static_cast<int>(shift.uniform_index(ref.height()));
    const int sx = static_cast<int>(shift.uniform_index(ref.width()));
    const RankMatrix& rm = ranks.at(key);
    densified.push_back({densify(subsample(ref, threshold_ranks(rm, cfg.near_rate, sy, sx))),
                         densify(subsample(ref, threshold_ranks(rm, cfg.far_rate, sy, sx)))});
    st.scenes.push_back(std::move(s));
  }
  if (st.scenes.empty()) throw ValidationError("no test images of at least the evaluation patch size");

  st.methods = {"ground-truth", "densified"};
  for (const auto& s : st.scenes) st.recon["ground-truth"].push_back({s.ref, s.ref});
  st.recon["densified"] = densified;
  for (const auto& name : cfg.variants) {
    st.methods.push_back(name);
    Checkpoint near = load_checkpoint(st.checkpoints.at(name + "/near"));
    Checkpoint far = load_checkpoint(st.checkpoints.at(name + "/far"));
    for (const auto& d : densified) {
      st.recon[name].push_back({reconstruct(near.generator, d.near), reconstruct(far.generator, d.far)});
    }
  }
  for (const auto& m : st.methods) {
    if (m == "ground-truth") continue;
    std::vector<double> near_err, far_err;
    for (std::size_t i = 0; i < st.scenes.size(); ++i) {
      const auto& r = st.recon[m][i];
      const auto dir = cfg.work_dir / "reconstruct" / dir_name(m);
      write_png(r.near, dir / (st.scenes[i].stem + "_near.png"));
      write_png(r.far, dir / (st.scenes[i].stem + "_far.png"));
      near_err.push_back(mse(st.scenes[i].ref, r.near));
      far_err.push_back(mse(st.scenes[i].ref, r.far));
    }
    rep.metrics[m] = {{"near_mse", mean_of(near_err)}, {"far_mse", mean_of(far_err)}};
    rep.artifacts.push_back(rel(cfg, cfg.work_dir / "reconstruct" / dir_name(m)));
  }
  rep.metrics["images"] = st.scenes.size();
}

void stage_composite(const PipelineConfig& cfg, RunState& st, StageReport& rep) {
  for (const auto& m : st.methods) {
    std::vector<double> err;
    const auto dir = cfg.work_dir / "composite" / dir_name(m);
    for (std::size_t i = 0; i < st.scenes.size(); ++i) {
      const ImagePatch c =
          composite_at(st.scenes[i], st.recon[m][i], cfg.partition, cfg.partition.far_boundary_deg);
      write_png(c, dir / (st.scenes[i].stem + ".png"));
      err.push_back(mse(st.scenes[i].ref, c));
    }
    rep.metrics[m] = {{"mse", mean_of(err)}};
    rep.artifacts.push_back(rel(cfg, dir));
  }
}

void stage_calibrate(const PipelineConfig& cfg, RunState& st, StageReport& rep) {
  BlurStudy study;
  study.patch_size = cfg.calibration_patch_size;
  study.crops_per_image = cfg.calibration_crops;
  study.blur_ladder = cfg.blur_ladder;
  study.eccentricities = cfg.calibration_eccentricities;
  study.trials = cfg.observer_trials;
  study.observer = cfg.observer;
  study.seed = cfg.seeds.calibration;
  std::vector<ImagePatch> images;
  for (const auto& s : st.scenes) images.push_back(s.ref);
  const std::vector<CalibrationItem> items = simulate_blur_study(images, study);
  FitOptions opt;
  opt.restarts = cfg.calibration_restarts;
  opt.seed = cfg.seeds.calibration;
  CalVggModel model = fit_calvgg_model(items, opt);
  for (const auto& slice : model.slices) {
    rep.metrics["fit_mse"][std::to_string(static_cast<int>(slice.eccentricity_deg))] = slice.mse;
  }
  const auto cal = cross_validate(items, calvgg_fitter(opt), cfg.folds, cfg.seeds.calibration);
  const auto base = cross_validate_fixed(items, sigmoid_baseline(), cfg.folds, cfg.seeds.calibration);
  rep.metrics["items"] = items.size();
  rep.metrics["cv_r_calibrated"] = cal.fold_r;
  rep.metrics["cv_r_baseline"] = base.fold_r;
  rep.metrics["cv_mean_r_calibrated"] = cal.mean_r;
  rep.metrics["cv_mean_r_baseline"] = base.mean_r;
  const auto path = cfg.work_dir / "calibration" / "model.json";
  model.save(path);
  rep.artifacts.push_back(rel(cfg, path));
  st.model = std::move(model);
}

void stage_evaluate(const PipelineConfig& cfg, RunState& st, StageReport& rep) {
  std::vector<SweepScene> scenes;
  for (const auto& s : st.scenes) scenes.push_back({s.ref, s.gaze, s.geom});
  std::vector<SweepMethod> methods;
  for (const auto& m : st.methods) {
    methods.push_back({m, [&, m](std::size_t i, double b) -> std::optional<ImagePatch> {
                         return composite_at(st.scenes[i], st.recon.at(m)[i], cfg.partition, b);
                       }});
  }
  const SweepResult r =
      sweep_far_boundary(*st.model, scenes, methods, cfg.boundaries, cfg.eval_patch_size);
  const auto path = cfg.work_dir / "evaluate" / "sweep.csv";
  write_sweep_csv(r.rows, path);
  std::map<std::string, std::vector<double>> per;
  for (const auto& row : r.rows) per[row.method].push_back(row.detection_rate);
  for (const auto& m : st.methods) rep.metrics["mean_detection_rate"][m] = mean_of(per[m]);
  rep.metrics["rows"] = r.rows.size();
  rep.metrics["missing"] = r.missing;
  rep.artifacts.push_back(rel(cfg, path));
}

void stage_plot(const PipelineConfig& cfg, RunState&, StageReport& rep) {
  const auto png = cfg.work_dir / "evaluate" / "sweep.png";
  const PlotSummary s = plot_curves(cfg.work_dir / "evaluate" / "sweep.csv", png);
  rep.metrics["lines"] = s.lines;
  rep.artifacts.push_back(rel(cfg, png));
}

[[noreturn]] void rethrow_with_stage(const std::string& stage) {
  const std::string prefix = "stage " + stage + " failed: ";
  try {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

}  // namespace

RunReport run_end_to_end(const PipelineConfig& cfg) {
  using StageFn = void (*)(const PipelineConfig&, RunState&, StageReport&);
  const std::vector<std::pair<std::string, StageFn>> stages = {
      {"build-dataset", stage_build_dataset}, {"synthesize", stage_synthesize},
      {"train", stage_train},                 {"reconstruct", stage_reconstruct},
      {"composite", stage_composite},         {"calibrate", stage_calibrate},
      {"evaluate", stage_evaluate},           {"plot", stage_plot}};

  RunReport report;
  report.seeds = cfg.seeds;
  cfg.validate();
  std::filesystem::create_directories(cfg.work_dir);
  RunLock lock(cfg.work_dir);
  {
    std::ofstream out(cfg.work_dir / "config.json");
    out << cfg.to_json().dump(2) << '\n';
  }
  {
    // The output location is not part of the experiment's identity.
    nlohmann::json identity = cfg.to_json();
    identity["paths"].erase("work_dir");
    report.config_sha256 = sha256_hex(identity.dump());
  }
  auto write_report = [&] {
    std::ofstream out(cfg.work_dir / "report.json");
    out << report.to_json().dump(2) << '\n';
  };

  RunState state;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    StageReport rep;
    rep.name = stages[i].first;
    std::cerr << "[" << i + 1 << "/" << stages.size() << "] " << rep.name << '\n';
    try {
      stages[i].second(cfg, state, rep);
      rep.status = "ok";
      report.stages.push_back(rep);
      write_report();
    } catch (const std::exception& e) {
      rep.status = "failed";
      rep.error = e.what();
      report.stages.push_back(rep);
      for (std::size_t k = i + 1; k < stages.size(); ++k) {
        report.stages.push_back({stages[k].first, "skipped", "", json::object(), {}});
      }
      write_report();
      rethrow_with_stage(rep.name);
    }
  }
  return report;
}

}  // namespace fovrec
