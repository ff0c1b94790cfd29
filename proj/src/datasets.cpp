#include "fovrec/datasets.hpp"

#include <iostream>
#include <optional>
#include <set>

#include "fovrec/errors.hpp"
#include "fovrec/image.hpp"
#include "fovrec/rng.hpp"
#include "fovrec/sampling.hpp"

namespace fovrec {

DistortionThresholds DistortionThresholds::expert() {
  return {"expert",
          {{8, 9.09}, {14, 6.89}, {20, 4.71}},
          {{8, {7.85, 10.48}}, {14, {5.78, 8.14}}, {20, {3.60, 5.94}}}};
}

DistortionThresholds DistortionThresholds::naive() {
  return {"naive",
          {{8, 7.93}, {14, 4.57}, {20, 2.06}},
          {{8, {7.47, 8.41}}, {14, {3.98, 5.29}}, {20, {1.30, 2.76}}}};
}

DistortionThresholds DistortionThresholds::for_cohort(const std::string& cohort) {
  if (cohort == "expert") return expert();
  if (cohort == "naive") return naive();
  throw ValidationError("unknown cohort: " + cohort + " (expected expert or naive)");
}

double DistortionThresholds::at(int eccentricity_deg) const {
  const auto it = percent.find(eccentricity_deg);
  if (it == percent.end()) {
    throw ValidationError("no " + cohort + " threshold at " + std::to_string(eccentricity_deg) +
                          " degrees");
  }
  return it->second;
}

void DistortionThresholds::validate() const {
  if (!percent.count(8) || !percent.count(14)) {
    throw ValidationError("thresholds need entries at 8 and 14 degrees");
  }
  std::optional<double> prev;
  for (const auto& [ecc, p] : percent) {
    if (!(p > 0.0 && p <= 100.0)) throw ValidationError("threshold percent outside (0, 100]");
    if (prev && !(p < *prev)) {
      throw ValidationError("thresholds must decrease strictly with eccentricity");
    }
    prev = p;
  }
}

namespace {

struct Source {
  std::filesystem::path path;
  ImagePatch image;
};

std::vector<Source> usable_sources(const std::filesystem::path& dir, int patch_size) {
  std::vector<Source> out;
  for (const auto& f : list_image_files(dir)) {
    try {
      ImagePatch img = read_image(f);
      if (img.height() < patch_size || img.width() < patch_size) {
        std::cerr << "warning: skipping " << f.string() << ": smaller than " << patch_size << "x"
                  << patch_size << '\n';
        continue;
      }
      out.push_back({f, std::move(img)});
    } catch (const IoError& e) {
      std::cerr << "warning: skipping " << f.string() << ": " << e.what() << '\n';
    }
  }
  if (out.empty()) throw ValidationError("no usable source images in " + dir.string());
  return out;
}

struct Crop {
  const Source* source;
  int index;  // crop number within the source
  CropRect rect;
  std::uint64_t seed;
};

// Round-robin over sources so per-source counts differ by at most one.
// Offsets are drawn per source and redrawn on collision when the image has
// room for distinct crops.
std::vector<Crop> plan_crops(const std::vector<Source>& sources, int n, int patch,
                             std::uint64_t seed) {
  if (n < 1) throw ValidationError("n_patches must be >= 1");
  std::vector<Crop> crops;
  std::vector<std::set<std::pair<int, int>>> used(sources.size());
  std::vector<int> counts(sources.size(), 0);
  for (int k = 0; k < n; ++k) {
    const std::size_t s = static_cast<std::size_t>(k) % sources.size();
    const Source& src = sources[s];
    const int idx = counts[s]++;
    const std::string stem = src.path.stem().string();
    const std::uint64_t crop_seed = Rng::derive(seed, "crop/" + stem + "/" + std::to_string(idx));
    Rng rng(crop_seed);
    const auto room = static_cast<std::size_t>(src.image.height() - patch + 1) *
                      static_cast<std::size_t>(src.image.width() - patch + 1);
    int y = 0, x = 0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      y = static_cast<int>(rng.uniform_index(src.image.height() - patch + 1));
      x = static_cast<int>(rng.uniform_index(src.image.width() - patch + 1));
      if (used[s].size() >= room || !used[s].count({y, x})) break;
    }
    used[s].insert({y, x});
    crops.push_back({&src, idx, {x, y, patch, patch}, crop_seed});
  }
  return crops;
}

std::string crop_name(const Crop& c) {
  return c.source->path.stem().string() + "_" + std::to_string(c.index) + ".png";
}

ImagePatch cut(const Crop& c) {
  return ImagePatch(crop(c.source->image.pixels(), c.rect.y, c.rect.x, c.rect.height, c.rect.width));
}

bool recorded(const DatasetManifest& m, const std::string& kind, const Crop& c,
              const std::string& region) {
  const ManifestEntry* e = m.find(kind, c.source->path.filename().string(), c.rect, region);
  return e != nullptr && std::filesystem::exists(m.resolve(e->patch_path));
}

}  // namespace

DatasetManifest build_generator_dataset(const std::filesystem::path& image_dir,
                                        const std::filesystem::path& out_dir,
                                        const GeneratorDatasetConfig& cfg) {
  if (cfg.patch_size < ImagePatch::kMinSide) throw ValidationError("patch size too small");
  for (double r : {cfg.near_rate, cfg.far_rate}) {
    if (!(r > 0.0 && r <= 1.0)) throw ValidationError("sampling rates must lie in (0, 1]");
  }
  const auto sources = usable_sources(image_dir, cfg.patch_size);
  const auto crops = plan_crops(sources, cfg.n_patches, cfg.patch_size, cfg.seed);
  const RankMatrix ranks = void_and_cluster_ranks(cfg.patch_size, cfg.patch_size,
                                                  Rng::derive(cfg.seed, "ranks"));
  std::filesystem::create_directories(out_dir);
  DatasetManifest manifest = DatasetManifest::open(out_dir / "generator.jsonl");
  const std::pair<std::string, double> regions[] = {{"near", cfg.near_rate}, {"far", cfg.far_rate}};

  for (const Crop& c : crops) {
    const std::string name = crop_name(c);
    const std::string natural_rel = "natural/" + name;
    std::optional<ImagePatch> patch;
    for (const auto& [region, rate] : regions) {
      if (!recorded(manifest, "natural", c, region)) {
        if (!patch) patch = cut(c);
        write_png(*patch, manifest.resolve(natural_rel));
        manifest.append({"natural", natural_rel, c.source->path.filename().string(), c.rect, region,
                         0.0, "", c.seed, ""});
      }
      if (recorded(manifest, "densified_input", c, region)) continue;
      if (!patch) patch = cut(c);
      // Every entry sees the shared dither matrix at its own toroidal shift.
      const std::uint64_t mask_seed = Rng::derive(c.seed, "mask/" + region);
      Rng shift(mask_seed);
      const SamplingMask mask =
          threshold_ranks(ranks, rate, static_cast<int>(shift.uniform_index(cfg.patch_size)),
                          static_cast<int>(shift.uniform_index(cfg.patch_size)));
      const std::string rel = "densified/" + region + "/" + name;
      write_png(densify(subsample(*patch, mask)), manifest.resolve(rel));
      manifest.append({"densified_input", rel, c.source->path.filename().string(), c.rect, region,
                       rate, "void-and-cluster", mask_seed, natural_rel});
    }
  }
  return manifest;
}

DatasetManifest build_critic_dataset(const std::filesystem::path& image_dir,
                                     const std::filesystem::path& out_dir,
                                     const CriticDatasetConfig& cfg) {
  cfg.thresholds.validate();
  if (cfg.patch_size < ImagePatch::kMinSide) throw ValidationError("patch size too small");
  const auto sources = usable_sources(image_dir, cfg.patch_size);
  const auto crops = plan_crops(sources, cfg.n_patches, cfg.patch_size, cfg.seed);
  const auto pristine_dir = out_dir / "pristine";
  std::filesystem::create_directories(pristine_dir);
  for (const Crop& c : crops) {
    const auto path = pristine_dir / crop_name(c);
    if (!std::filesystem::exists(path)) write_png(cut(c), path);
  }

  SynthesisConfig synth = cfg.synthesis;
  synth.seed = Rng::derive(cfg.seed, "synthesis");
  const auto manifest_path = out_dir / "critic.jsonl";
  batch_synthesize(pristine_dir,
                   {{"near", cfg.thresholds.at(8)}, {"far", cfg.thresholds.at(14)}}, synth,
                   manifest_path);

  DatasetManifest manifest = DatasetManifest::open(manifest_path);
  for (const Crop& c : crops) {
    for (const char* region : {"near", "far"}) {
      if (recorded(manifest, "natural", c, region)) continue;
      manifest.append({"natural", "pristine/" + crop_name(c), c.source->path.filename().string(),
                       c.rect, region, 0.0, "", c.seed, ""});
    }
  }
  return manifest;
}

}  // namespace fovrec
