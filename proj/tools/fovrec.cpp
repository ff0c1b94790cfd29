// Command-line entry point. Exit codes: 0 success, 2 invalid input,
// 3 file or network error, 4 optimization failed to converge, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <curl/curl.h>
#include <json.hpp>

#include "fovrec/backbone.hpp"
#include "fovrec/calibration.hpp"
#include "fovrec/datasets.hpp"
#include "fovrec/errors.hpp"
#include "fovrec/foveation.hpp"
#include "fovrec/manifest.hpp"
#include "fovrec/metrics.hpp"
#include "fovrec/pipeline.hpp"
#include "fovrec/plot.hpp"
#include "fovrec/rng.hpp"
#include "fovrec/sampling.hpp"
#include "fovrec/synthesis.hpp"
#include "fovrec/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fovrec;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitConvergence = 4;

constexpr const char* kDefaultWeightsUrl = "https://download.pytorch.org/models/vgg19-dcbb9e9d.pth";

PixelPoint parse_gaze(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ValidationError("gaze must be X,Y: " + s);
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ValidationError("gaze must be X,Y: " + s);
  }
}

// "9:22" (inclusive, step 1), "9:22:0.5", or "9,12,15".
std::vector<double> parse_boundaries(const std::string& s) {
  std::vector<double> out;
  try {
    if (s.find(':') != std::string::npos) {
      std::vector<double> parts;
      std::stringstream ss(s);
      std::string tok;
      while (std::getline(ss, tok, ':')) parts.push_back(std::stod(tok));
      if (parts.size() < 2 || parts.size() > 3) throw ValidationError("bad range");
      const double step = parts.size() == 3 ? parts[2] : 1.0;
      if (!(step > 0.0) || parts[1] < parts[0]) throw ValidationError("bad range");
      const int n = static_cast<int>(std::floor((parts[1] - parts[0]) / step + 1e-9));
      for (int i = 0; i <= n; ++i) out.push_back(parts[0] + i * step);
    } else {
      std::stringstream ss(s);
      std::string tok;
      while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    }
  } catch (const ValidationError&) {
    throw ValidationError("boundaries must look like 9:22 or 9,12,15: " + s);
  } catch (const std::exception&) {
    throw ValidationError("boundaries must look like 9:22 or 9,12,15: " + s);
  }
  if (out.empty()) throw ValidationError("no boundaries given");
  return out;
}

FieldGeometry geometry_for(const ImagePatch& img, double width_m, double distance_m) {
  FieldGeometry g;
  g.width_px = img.width();
  g.height_px = img.height();
  g.physical_width_m = width_m;
  g.viewing_distance_m = distance_m;
  g.validate();
  return g;
}

void apply_seed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.seeds = {Rng::derive(seed, "dataset"), Rng::derive(seed, "critic"), Rng::derive(seed, "train"),
               Rng::derive(seed, "masks"), Rng::derive(seed, "calibration")};
}

size_t write_to_file(char* data, size_t size, size_t n, void* user) {
  auto* out = static_cast<std::ofstream*>(user);
  out->write(data, static_cast<std::streamsize>(size * n));
  return *out ? size * n : 0;
}

void download(const std::string& url, const fs::path& dest) {
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  const fs::path tmp = dest.string() + ".part";
  std::ofstream out(tmp, std::ios::binary);
  if (!out) throw IoError("cannot write " + tmp.string());
  CURL* curl = curl_easy_init();
  if (curl == nullptr) throw IoError("curl initialisation failed");
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_to_file);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &out);
  const CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  out.close();
  if (rc != CURLE_OK) {
    fs::remove(tmp);
    throw IoError("download of " + url + " failed: " + curl_easy_strerror(rc));
  }
  fs::rename(tmp, dest);
}

struct CalibrationRow {
  double ecc;
  fs::path ref;
  fs::path test;
  double prob;
};

// eccentricity,reference,test,probability; image paths relative to the file.
std::vector<CalibrationRow> read_calibration_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<CalibrationRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (lineno == 1 && !f.empty() && f[0] == "eccentricity") continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 4) throw ValidationError(where + ": expected 4 fields");
    try {
      rows.push_back({std::stod(f[0]), path.parent_path() / f[1], path.parent_path() / f[2],
                      std::stod(f[3])});
    } catch (const std::exception&) {
      throw ValidationError(where + ": malformed number");
    }
    if (!(rows.back().prob >= 0.0 && rows.back().prob <= 1.0)) {
      throw ValidationError(where + ": probability outside [0, 1]");
    }
  }
  if (rows.empty()) throw ValidationError("no calibration rows in " + path.string());
  return rows;
}

json logistic_json(const LogisticParams& p) {
  return {{"a", p.a}, {"b", p.b}, {"c", p.c}, {"k", p.k}, {"q", p.q}, {"v", p.v}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foveated reconstruction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  bool seed_given = false;
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { seed = s, seed_given = true; },
      "Seed for every random draw of the command");

  // make-mask
  auto* mk = app.add_subcommand("make-mask", "Write a binary sampling mask");
  int mk_h = 256, mk_w = 256;
  double mk_rate = 0.12;
  std::string mk_strategy = "void-and-cluster";
  fs::path mk_out, mk_image, mk_densified;
  mk->add_option("--height", mk_h)->check(CLI::PositiveNumber);
  mk->add_option("--width", mk_w)->check(CLI::PositiveNumber);
  mk->add_option("--rate", mk_rate, "Fraction of pixels kept");
  mk->add_option("--strategy", mk_strategy)->check(CLI::IsMember({"void-and-cluster", "random"}));
  mk->add_option("--out", mk_out)->required();
  mk->add_option("--image", mk_image, "Also sample this image (mask takes its size)");
  mk->add_option("--densified", mk_densified, "Where to write the densified image");

  // build-dataset
  auto* bd = app.add_subcommand("build-dataset", "Build a generator or critic dataset");
  std::string bd_kind;
  fs::path bd_images, bd_out;
  int bd_n = 1000, bd_patch = 256, bd_iters = 1000, bd_refine = 500;
  std::string bd_cohort = "expert", bd_strategy = "A";
  double bd_near = 0.12, bd_far = 0.007;
  bd->add_option("kind", bd_kind)->required()->check(CLI::IsMember({"generator", "critic"}));
  bd->add_option("--images", bd_images)->required();
  bd->add_option("--out", bd_out)->required();
  bd->add_option("--n", bd_n, "Number of patches")->check(CLI::PositiveNumber);
  bd->add_option("--patch-size", bd_patch)->check(CLI::PositiveNumber);
  bd->add_option("--cohort", bd_cohort)->check(CLI::IsMember({"expert", "naive"}));
  bd->add_option("--near-rate", bd_near);
  bd->add_option("--far-rate", bd_far);
  bd->add_option("--strategy", bd_strategy, "Synthesis strategy for critic data (A or B)");
  bd->add_option("--iters", bd_iters, "Constrained synthesis iterations");
  bd->add_option("--refine-iters", bd_refine, "Unconstrained iterations of strategy A");

  // synthesize
  auto* sy = app.add_subcommand("synthesize", "Synthesize distorted patches from exemplars");
  fs::path sy_exemplars, sy_out;
  std::optional<double> sy_percent;
  std::string sy_strategy = "A", sy_cohort = "expert", sy_region = "near";
  int sy_iters = 1000, sy_refine = 500;
  sy->add_option("--exemplars", sy_exemplars)->required();
  sy->add_option("--out", sy_out)->required();
  sy->add_option("--percent", sy_percent, "Guiding-sample percentage (omit for cohort thresholds)");
  sy->add_option("--region", sy_region, "Region label used with --percent")
      ->check(CLI::IsMember({"near", "far"}));
  sy->add_option("--cohort", sy_cohort)->check(CLI::IsMember({"expert", "naive"}));
  sy->add_option("--strategy", sy_strategy)->check(CLI::IsMember({"A", "B"}));
  sy->add_option("--iters", sy_iters);
  sy->add_option("--refine-iters", sy_refine);

  // train
  auto* tr = app.add_subcommand("train", "Train a reconstruction network");
  std::string tr_variant = "l2", tr_adv = "standard", tr_region = "near", tr_peak = "H";
  fs::path tr_config, tr_gen, tr_critic, tr_out;
  std::optional<int> tr_steps, tr_epochs, tr_batch;
  bool tr_resume = false;
  tr->add_option("--variant", tr_variant)->check(CLI::IsMember({"l2", "lpips", "lapl"}));
  tr->add_option("--adv", tr_adv)->check(CLI::IsMember({"standard", "ours"}));
  tr->add_option("--region", tr_region)->check(CLI::IsMember({"near", "far"}));
  tr->add_option("--lapl-peak", tr_peak, "Laplacian peak level: H, M or L<n>");
  tr->add_option("--config", tr_config, "Training configuration JSON");
  tr->add_option("--generator-manifest", tr_gen)->required();
  tr->add_option("--critic-manifest", tr_critic, "Needed for --adv ours");
  tr->add_option("--out", tr_out)->required();
  tr->add_option("--max-steps", tr_steps);
  tr->add_option("--max-epochs", tr_epochs);
  tr->add_option("--batch-size", tr_batch);
  tr->add_flag("--resume", tr_resume, "Continue from the checkpoint in --out");

  // reconstruct
  auto* rc = app.add_subcommand("reconstruct", "Run a trained generator on an image");
  fs::path rc_ckpt, rc_input, rc_mask, rc_out;
  std::optional<double> rc_rate;
  rc->add_option("--checkpoint", rc_ckpt)->required();
  rc->add_option("--input", rc_input, "Densified input, or a full image with --mask/--rate")
      ->required();
  rc->add_option("--mask", rc_mask, "Sample --input with this mask first");
  rc->add_option("--rate", rc_rate, "Sample --input with a fresh void-and-cluster mask first");
  rc->add_option("--out", rc_out)->required();

  // composite
  auto* cp = app.add_subcommand("composite", "Blend near and far reconstructions around a gaze point");
  fs::path cp_full, cp_near, cp_far, cp_out;
  std::string cp_gaze;
  RegionPartition cp_part;
  double cp_width = 0.5977, cp_dist = 0.70;
  cp->add_option("--full", cp_full)->required();
  cp->add_option("--near", cp_near)->required();
  cp->add_option("--far", cp_far)->required();
  cp->add_option("--gaze", cp_gaze, "X,Y in pixels (default: centre)");
  cp->add_option("--near-boundary", cp_part.near_boundary_deg);
  cp->add_option("--far-boundary", cp_part.far_boundary_deg);
  cp->add_option("--blend-band", cp_part.blend_band_deg);
  cp->add_option("--display-width", cp_width, "Physical display width in metres");
  cp->add_option("--distance", cp_dist, "Viewing distance in metres");
  cp->add_option("--out", cp_out)->required();

  // calibrate
  auto* ca = app.add_subcommand("calibrate", "Fit a visibility model to detection data");
  std::string ca_metric = "calvgg";
  fs::path ca_data, ca_out;
  std::vector<double> ca_ecc;
  int ca_restarts = 32;
  ca->add_option("--metric", ca_metric)
      ->check(CLI::IsMember({"l2", "ssim", "msssim", "lpips", "calvgg"}));
  ca->add_option("--data", ca_data, "CSV: eccentricity,reference,test,probability")->required();
  ca->add_option("--ecc", ca_ecc, "Eccentricities to fit (default: all in the data)");
  ca->add_option("--restarts", ca_restarts)->check(CLI::PositiveNumber);
  ca->add_option("--out", ca_out)->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Predict detection probability for a full image");
  fs::path ev_model, ev_ref, ev_test;
  std::string ev_gaze;
  double ev_width = 0.5977, ev_dist = 0.70;
  int ev_patch = 256;
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--ref", ev_ref)->required();
  ev->add_option("--test", ev_test)->required();
  ev->add_option("--gaze", ev_gaze, "X,Y in pixels (default: centre)");
  ev->add_option("--display-width", ev_width);
  ev->add_option("--distance", ev_dist);
  ev->add_option("--patch", ev_patch)->check(CLI::PositiveNumber);

  // sweep
  auto* sw = app.add_subcommand("sweep", "Detection rate against the far-periphery boundary");
  fs::path sw_model, sw_ref, sw_out;
  std::string sw_boundaries = "9:22", sw_gaze;
  std::vector<std::string> sw_methods;
  RegionPartition sw_part;
  double sw_width = 0.5977, sw_dist = 0.70;
  int sw_patch = 256;
  sw->add_option("--model", sw_model)->required();
  sw->add_option("--ref", sw_ref)->required();
  sw->add_option("--method", sw_methods, "NAME=NEAR.png,FAR.png (repeatable)")->required();
  sw->add_option("--boundaries", sw_boundaries);
  sw->add_option("--gaze", sw_gaze);
  sw->add_option("--near-boundary", sw_part.near_boundary_deg);
  sw->add_option("--blend-band", sw_part.blend_band_deg);
  sw->add_option("--display-width", sw_width);
  sw->add_option("--distance", sw_dist);
  sw->add_option("--patch", sw_patch)->check(CLI::PositiveNumber);
  sw->add_option("--out", sw_out)->required();

  // plot
  auto* pl = app.add_subcommand("plot", "Render sweep curves to PNG");
  fs::path pl_csv, pl_out;
  pl->add_option("--csv", pl_csv)->required();
  pl->add_option("--out", pl_out)->required();

  // run / config show
  std::vector<fs::path> cfg_files;
  std::vector<std::string> cfg_sets;
  auto* rn = app.add_subcommand("run", "Run every stage end to end");
  rn->add_option("--config", cfg_files, "Config file(s), later ones win");
  rn->add_option("--set", cfg_sets, "Override as dotted.key=value");
  auto* cf = app.add_subcommand("config", "Configuration utilities");
  cf->require_subcommand(1);
  auto* cs = cf->add_subcommand("show", "Print the resolved configuration with all defaults");
  cs->add_option("--config", cfg_files);
  cs->add_option("--set", cfg_sets);

  // verify
  auto* vf = app.add_subcommand("verify", "Check a dataset manifest");
  fs::path vf_manifest;
  vf->add_option("--manifest", vf_manifest)->required();

  // fetch-weights
  auto* fw = app.add_subcommand("fetch-weights", "Download backbone weights into the cache");
  std::string fw_url = kDefaultWeightsUrl, fw_sha;
  fs::path fw_out;
  fw->add_option("--url", fw_url);
  fw->add_option("--sha256", fw_sha, "Expected digest (full hex or a prefix)");
  fw->add_option("--out", fw_out, "Destination (default: $FOVREC_WEIGHTS_DIR/vgg19.pth)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    if (*mk) {
      int h = mk_h, w = mk_w;
      std::optional<ImagePatch> img;
      if (!mk_image.empty()) {
        img = read_image(mk_image);
        h = img->height();
        w = img->width();
      }
      const SamplingMask mask = mk_strategy == "random" ? uniform_random_mask(h, w, mk_rate, seed)
                                                        : void_and_cluster_mask(h, w, mk_rate, seed);
      write_mask_png(mask, mk_out);
      if (img && !mk_densified.empty()) write_png(densify(subsample(*img, mask)), mk_densified);
      std::cout << mask.popcount() << " of " << static_cast<std::size_t>(h) * w
                << " pixels sampled\n";
    } else if (*bd) {
      if (bd_kind == "generator") {
        GeneratorDatasetConfig c;
        c.n_patches = bd_n;
        c.patch_size = bd_patch;
        c.near_rate = bd_near;
        c.far_rate = bd_far;
        c.seed = seed;
        const auto m = build_generator_dataset(bd_images, bd_out, c);
        std::cout << m.entries().size() << " entries in " << m.path().string() << '\n';
      } else {
        CriticDatasetConfig c;
        c.n_patches = bd_n;
        c.patch_size = bd_patch;
        c.thresholds = DistortionThresholds::for_cohort(bd_cohort);
        c.synthesis.strategy = parse_strategy(bd_strategy);
        c.synthesis.max_iters = bd_iters;
        c.synthesis.refine_iters = bd_refine;
        c.seed = seed;
        const auto m = build_critic_dataset(bd_images, bd_out, c);
        std::cout << m.entries().size() << " entries in " << m.path().string() << '\n';
      }
    } else if (*sy) {
      SynthesisConfig c;
      c.strategy = parse_strategy(sy_strategy);
      c.max_iters = sy_iters;
      c.refine_iters = sy_refine;
      c.seed = seed;
      std::vector<BatchRegion> regions;
      if (sy_percent) {
        regions.push_back({sy_region, *sy_percent});
      } else {
        const auto t = DistortionThresholds::for_cohort(sy_cohort);
        regions = {{"near", t.at(8)}, {"far", t.at(14)}};
      }
      const auto s = batch_synthesize(sy_exemplars, regions, c, sy_out / "distorted.jsonl");
      for (const auto& skipped : s.skipped) std::cerr << "skipped " << skipped << '\n';
      std::cout << s.synthesized << " synthesized, " << s.entries.size() << " in manifest\n";
    } else if (*tr) {
      TrainConfig c;
      if (!tr_config.empty()) {
        std::ifstream in(tr_config);
        if (!in) throw IoError("cannot read " + tr_config.string());
        std::stringstream ss;
        ss << in.rdbuf();
        c = TrainConfig::from_json(ss.str());
      }
      std::string name = tr_variant == "lapl" ? "lapl-" + tr_peak : tr_variant;
      if (tr_adv == "ours") name += "*";
      c.variant = parse_loss_variant(name);
      c.region = tr_region;
      if (seed_given || tr_config.empty()) c.seed = seed;
      if (tr_steps) c.max_steps = *tr_steps;
      if (tr_epochs) c.max_epochs = *tr_epochs;
      if (tr_batch) c.batch_size = *tr_batch;
      c.validate();
      std::optional<DatasetManifest> critic;
      if (!tr_critic.empty()) critic = DatasetManifest::load(tr_critic);
      const auto data = load_training_data(DatasetManifest::load(tr_gen), critic, c);
      const auto r = train(data, c, tr_out, tr_resume);
      std::cout << "trained " << r.steps << " steps" << (r.plateaued ? " (plateau)" : "")
                << "; checkpoint " << r.checkpoint.string() << '\n';
    } else if (*rc) {
      ImagePatch input = read_image(rc_input);
      if (!rc_mask.empty()) {
        input = densify(subsample(input, read_mask_png(rc_mask)));
      } else if (rc_rate) {
        input = densify(
            subsample(input, void_and_cluster_mask(input.height(), input.width(), *rc_rate, seed)));
      }
      write_png(reconstruct(rc_ckpt, input), rc_out);
    } else if (*cp) {
      const ImagePatch full = read_image(cp_full);
      const FieldGeometry geom = geometry_for(full, cp_width, cp_dist);
      cp_part.gaze = cp_gaze.empty() ? PixelPoint{(full.width() - 1) / 2.0, (full.height() - 1) / 2.0}
                                     : parse_gaze(cp_gaze);
      write_png(composite_foveated(full, read_image(cp_near), read_image(cp_far),
                                   partition_weights(geom, cp_part)),
                cp_out);
    } else if (*ca) {
      const auto rows = read_calibration_csv(ca_data);
      const MetricId metric = parse_metric(ca_metric);
      std::map<double, std::pair<std::vector<std::vector<double>>, std::vector<double>>> by_ecc;
      for (const auto& r : rows) {
        if (!ca_ecc.empty() && std::find(ca_ecc.begin(), ca_ecc.end(), r.ecc) == ca_ecc.end()) {
          continue;
        }
        const ImagePatch ref = read_image(r.ref), test = read_image(r.test);
        auto& slot = by_ecc[r.ecc];
        slot.first.push_back(metric == MetricId::kCalVgg ? layer_distances(ref, test)
                                                         : std::vector<double>{metric_score(metric, ref, test)});
        slot.second.push_back(r.prob);
      }
      if (by_ecc.empty()) throw ValidationError("no rows at the requested eccentricities");
      FitOptions opt;
      opt.restarts = ca_restarts;
      opt.seed = seed;
      if (metric == MetricId::kCalVgg) {
        CalVggModel model;
        model.layers = calvgg_layers();
        for (const auto& [ecc, d] : by_ecc) model.slices.push_back(calibrate_vgg(d.first, d.second, ecc, opt));
        model.save(ca_out);
        for (const auto& s : model.slices) std::cout << s.eccentricity_deg << " deg: mse " << s.mse << '\n';
      } else {
        json j = {{"metric", to_string(metric)}, {"slices", json::array()}};
        for (const auto& [ecc, d] : by_ecc) {
          std::vector<double> scores;
          for (const auto& f : d.first) scores.push_back(f[0]);
          const LogisticFit fit = fit_logistic(scores, d.second, opt);
          j["slices"].push_back({{"eccentricity_deg", ecc}, {"logistic", logistic_json(fit.params)},
                                 {"mse", fit.mse}});
          std::cout << ecc << " deg: mse " << fit.mse << '\n';
        }
        write_text(ca_out, j.dump(2) + "\n");
      }
    } else if (*ev) {
      const CalVggModel model = CalVggModel::load(ev_model);
      const ImagePatch ref = read_image(ev_ref), test = read_image(ev_test);
      const PixelPoint gaze = ev_gaze.empty() ? PixelPoint{(ref.width() - 1) / 2.0, (ref.height() - 1) / 2.0}
                                              : parse_gaze(ev_gaze);
      std::printf("%.6f\n", predict_full_image(model, ref, test, gaze,
                                               geometry_for(ref, ev_width, ev_dist), ev_patch));
    } else if (*sw) {
      const CalVggModel model = CalVggModel::load(sw_model);
      const ImagePatch ref = read_image(sw_ref);
      const FieldGeometry geom = geometry_for(ref, sw_width, sw_dist);
      const PixelPoint gaze = sw_gaze.empty() ? PixelPoint{(ref.width() - 1) / 2.0, (ref.height() - 1) / 2.0}
                                              : parse_gaze(sw_gaze);
      std::vector<SweepMethod> methods;
      for (const auto& spec : sw_methods) {
        const auto eq = spec.find('='), comma = spec.find(',');
        if (eq == std::string::npos || comma == std::string::npos || comma < eq) {
          throw ValidationError("method must be NAME=NEAR.png,FAR.png: " + spec);
        }
        const ImagePatch near = read_image(spec.substr(eq + 1, comma - eq - 1));
        const ImagePatch far = read_image(spec.substr(comma + 1));
        methods.push_back({spec.substr(0, eq), [=](std::size_t, double b) -> std::optional<ImagePatch> {
                             RegionPartition part = sw_part;
                             part.gaze = gaze;
                             part.far_boundary_deg = b;
                             return composite_foveated(ref, near, far, partition_weights(geom, part));
                           }});
      }
      const auto r = sweep_far_boundary(model, {{ref, gaze, geom}}, methods,
                                        parse_boundaries(sw_boundaries), sw_patch);
      write_sweep_csv(r.rows, sw_out);
      std::cout << r.rows.size() << " rows written to " << sw_out.string() << '\n';
    } else if (*pl) {
      const PlotSummary s = plot_curves(pl_csv, pl_out);
      std::cout << s.lines << " curves, boundary " << s.x_min << "-" << s.x_max << '\n';
    } else if (*rn || *cs) {
      PipelineConfig cfg = layered_config(cfg_files, cfg_sets);
      if (seed_given) apply_seed(cfg, seed);
      if (*cs) {
        std::cout << cfg.to_json().dump(2) << '\n';
      } else {
        const RunReport r = run_end_to_end(cfg);
        std::cout << r.to_json().dump(2) << '\n';
      }
    } else if (*vf) {
      const VerifyReport r = verify_manifest(DatasetManifest::load(vf_manifest));
      for (const auto& p : r.problems) std::cerr << p << '\n';
      if (!r.ok()) throw ValidationError(std::to_string(r.problems.size()) + " manifest problems");
      std::cout << "manifest ok\n";
    } else if (*fw) {
      fs::path dest = fw_out;
      if (dest.empty()) {
        const char* dir = std::getenv("FOVREC_WEIGHTS_DIR");
        if (dir == nullptr || *dir == '\0') {
          throw ValidationError("set FOVREC_WEIGHTS_DIR or pass --out");
        }
        dest = fs::path(dir) / "vgg19.pth";
      }
      if (fw_sha.empty() && fw_url == kDefaultWeightsUrl) fw_sha = "dcbb9e9d";
      curl_global_init(CURL_GLOBAL_DEFAULT);
      download(fw_url, dest);
      curl_global_cleanup();
      const std::string digest = sha256_file(dest);
      if (!fw_sha.empty() && digest.rfind(fw_sha, 0) != 0) {
        fs::remove(dest);
        throw IoError("checksum mismatch: expected " + fw_sha + ", got " + digest);
      }
      std::cout << dest.string() << " sha256 " << digest << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
