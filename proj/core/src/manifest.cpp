#include "rdf/manifest.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rdf {

using nlohmann::json;

std::vector<ManifestRecord> DatasetManifest::split(const std::string& tag) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records)
    if (r.split == tag) out.push_back(r);
  return out;
}

const ManifestRecord* DatasetManifest::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& file) {
  json j;
  j["version"] = m.version;
  j["records"] = json::array();
  for (const auto& r : m.records) {
    j["records"].push_back({{"id", r.id},
                            {"rainy", r.rainy_path},
                            {"clean", r.clean_path},
                            {"split", r.split},
                            {"seed", r.seed}});
  }
  j["log"] = m.log;
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write manifest: " + file.string());
  out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open manifest: " + file.string());
  json j = json::parse(in);
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  m.root = file.parent_path();
  for (const auto& rj : j.at("records")) {
    ManifestRecord r;
    r.id = rj.at("id").get<std::string>();
    r.rainy_path = rj.at("rainy").get<std::string>();
    r.clean_path = rj.at("clean").get<std::string>();
    r.split = rj.at("split").get<std::string>();
    r.seed = rj.at("seed").get<uint64_t>();
    m.records.push_back(std::move(r));
  }
  if (j.contains("log")) m.log = j.at("log").get<std::vector<std::string>>();
  for (const auto& r : m.records) {
    for (const auto& p : {r.rainy_path, r.clean_path}) {
      if (!std::filesystem::exists(m.resolve(p)))
        throw std::runtime_error("manifest references missing file: " + m.resolve(p).string());
    }
  }
  return m;
}

}  // namespace rdf
