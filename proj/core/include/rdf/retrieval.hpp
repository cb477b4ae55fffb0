#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rdf/image.hpp"
#include "rdf/manifest.hpp"

namespace rdf {

struct PerceptualHash {
  uint64_t bits = 0;
  bool operator==(const PerceptualHash&) const = default;
};

inline int hamming(PerceptualHash a, PerceptualHash b) {
  return std::popcount(a.bits ^ b.bits);
}

// DCT-based 64-bit hash: grayscale -> 32x32 -> 2-D DCT -> low-frequency
// block without the DC term, plus one extra low-frequency coefficient ->
// threshold at the median. Constant images hash to all-zero bits.
PerceptualHash perceptual_hash(const Image& img);

struct IndexEntry {
  std::string id;
  PerceptualHash hash;
  std::string clean_path;  // relative to index root
};

struct RetrievalIndex {
  int version = 1;
  std::filesystem::path root;
  std::vector<IndexEntry> entries;
};

// One entry per clean image in the given split. Missing files are an error.
RetrievalIndex build_index(const DatasetManifest& manifest, const std::string& split);

void save_index(const RetrievalIndex& index, const std::filesystem::path& file);
RetrievalIndex load_index(const std::filesystem::path& file);

struct RetrievalHit {
  std::string id;
  int distance = 0;
  Image clean;
};

// Linear Hamming scan; ties broken by lowest id; exclude_id is never
// returned. Throws if the index is empty after exclusion.
RetrievalHit nearest_reference(const RetrievalIndex& index, const Image& query,
                               const std::optional<std::string>& exclude_id = std::nullopt);

std::string hash_to_hex(PerceptualHash h);
PerceptualHash hash_from_hex(const std::string& hex);

}  // namespace rdf
