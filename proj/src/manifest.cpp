#include "fovrec/manifest.hpp"

#include <fstream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "fovrec/errors.hpp"

namespace fovrec {

using nlohmann::json;

std::string entry_to_json(const ManifestEntry& e) {
  json j;
  j["kind"] = e.kind;
  j["patch_path"] = e.patch_path;
  j["source_image"] = e.source_image;
  j["crop"] = {{"x", e.crop.x}, {"y", e.crop.y}, {"width", e.crop.width}, {"height", e.crop.height}};
  j["region"] = e.region;
  j["rate_or_percent"] = e.rate_or_percent;
  j["strategy"] = e.strategy;
  j["seed"] = e.seed;
  if (!e.partner.empty()) j["partner"] = e.partner;
  return j.dump();
}

ManifestEntry entry_from_json(const std::string& line) {
  const json j = json::parse(line);
  ManifestEntry e;
  e.kind = j.at("kind").get<std::string>();
  e.patch_path = j.at("patch_path").get<std::string>();
  e.source_image = j.at("source_image").get<std::string>();
  const json& c = j.at("crop");
  e.crop = {c.at("x").get<int>(), c.at("y").get<int>(), c.at("width").get<int>(),
            c.at("height").get<int>()};
  e.region = j.at("region").get<std::string>();
  e.rate_or_percent = j.at("rate_or_percent").get<double>();
  e.strategy = j.value("strategy", "");
  e.seed = j.at("seed").get<std::uint64_t>();
  e.partner = j.value("partner", "");
  return e;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m(path);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      m.entries_.push_back(entry_from_json(line));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return m;
}

DatasetManifest DatasetManifest::open(const std::filesystem::path& path) {
  return std::filesystem::exists(path) ? load(path) : DatasetManifest(path);
}

void DatasetManifest::save() const {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const auto tmp = std::filesystem::path(path_.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    for (const auto& e : entries_) out << entry_to_json(e) << '\n';
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path_);
}

void DatasetManifest::append(const ManifestEntry& entry) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to " + path_.string());
  out << entry_to_json(entry) << '\n';
  out.flush();
  if (!out) throw IoError("cannot append to " + path_.string());
  entries_.push_back(entry);
}

std::vector<ManifestEntry> DatasetManifest::select(const std::string& kind,
                                                   const std::string& region) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries_) {
    if (e.kind == kind && (region.empty() || e.region == region)) out.push_back(e);
  }
  return out;
}

const ManifestEntry* DatasetManifest::find(const std::string& kind, const std::string& source,
                                           const CropRect& crop, const std::string& region) const {
  for (const auto& e : entries_) {
    if (e.kind == kind && e.source_image == source && e.crop == crop && e.region == region) {
      return &e;
    }
  }
  return nullptr;
}

VerifyReport verify_manifest(const DatasetManifest& manifest) {
  VerifyReport report;
  std::set<std::tuple<std::string, int, int, int, int, std::string, std::string>> seen;
  std::set<std::string> paths;
  for (const auto& e : manifest.entries()) paths.insert(e.patch_path);
  for (const auto& e : manifest.entries()) {
    if (!std::filesystem::exists(manifest.resolve(e.patch_path))) {
      report.problems.push_back("missing file: " + e.patch_path);
    }
    const auto k = std::make_tuple(e.source_image, e.crop.x, e.crop.y, e.crop.width,
                                   e.crop.height, e.region, e.kind);
    if (!seen.insert(k).second) report.problems.push_back("duplicate entry: " + e.patch_path);
    if (e.kind == "densified_input") {
      if (e.partner.empty()) {
        report.problems.push_back("densified input without partner: " + e.patch_path);
      } else if (!paths.count(e.partner)) {
        report.problems.push_back("unresolved partner " + e.partner + " for " + e.patch_path);
      }
    }
    if (e.kind != "natural" && e.kind != "densified_input" && e.kind != "distorted") {
      report.problems.push_back("unknown kind '" + e.kind + "' for " + e.patch_path);
    }
  }
  return report;
}

}  // namespace fovrec
