#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rdf {

struct ManifestRecord {
  std::string id;
  std::string rainy_path;  // relative to manifest directory
  std::string clean_path;
  std::string split;  // "train" | "test"
  uint64_t seed = 0;
};

struct DatasetManifest {
  int version = 1;
  std::filesystem::path root;  // directory the manifest file lives in
  std::vector<ManifestRecord> records;
  std::vector<std::string> log;  // skipped-file notes from dataset build

  std::vector<ManifestRecord> split(const std::string& tag) const;
  const ManifestRecord* find(const std::string& id) const;
  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
};

void save_manifest(const DatasetManifest& m, const std::filesystem::path& file);
// Loads and verifies that every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& file);

}  // namespace rdf
