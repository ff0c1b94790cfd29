#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fovrec {

struct CropRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  bool operator==(const CropRect&) const = default;
};

// One generated patch. Paths are relative to the manifest's directory.
struct ManifestEntry {
  std::string kind;         // natural | densified_input | distorted
  std::string patch_path;
  std::string source_image;
  CropRect crop;
  std::string region;       // near | far
  double rate_or_percent = 0.0;
  std::string strategy;     // synthesis strategy or sampler name
  std::uint64_t seed = 0;
  std::string partner;      // ground-truth patch for densified_input entries

  bool operator==(const ManifestEntry&) const = default;
};

// JSON-lines file, one entry per line.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::filesystem::path path) : path_(std::move(path)) {}

  static DatasetManifest load(const std::filesystem::path& path);
  // Loads when present, otherwise starts empty.
  static DatasetManifest open(const std::filesystem::path& path);

  // Whole-file rewrite through a temporary file and rename.
  void save() const;
  // Adds the entry and appends its line to the file.
  void append(const ManifestEntry& entry);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path directory() const { return path_.parent_path(); }
  std::filesystem::path resolve(const std::string& relative) const {
    return directory() / relative;
  }

  std::vector<ManifestEntry> select(const std::string& kind, const std::string& region = "") const;
  const ManifestEntry* find(const std::string& kind, const std::string& source,
                            const CropRect& crop, const std::string& region) const;

 private:
  std::filesystem::path path_;
  std::vector<ManifestEntry> entries_;
};

std::string entry_to_json(const ManifestEntry& e);
ManifestEntry entry_from_json(const std::string& line);

struct VerifyReport {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

// Files exist, partners resolve, no duplicate (source, crop, region, kind).
VerifyReport verify_manifest(const DatasetManifest& manifest);

}  // namespace fovrec
