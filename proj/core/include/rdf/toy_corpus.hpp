#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rdf {

// Writes `count` procedural clean images (gradients, stripes, checkers,
// blobs, value noise) of size x size to dir. Images cycle through a few
// pattern families with small per-image jitter, so the corpus contains
// visually similar pairs for retrieval to find. Returns the written paths.
std::vector<std::filesystem::path> write_toy_corpus(const std::filesystem::path& dir, int count,
                                                    int size, uint64_t seed);

}  // namespace rdf
