#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rdf/tensor.hpp"

namespace rdf {

struct PatchGeometry {
  int patch = 1;
  int stride = 1;
  int grid_h = 0;
  int grid_w = 0;
};

struct PatchMatrix {
  Tensor rows;  // (N, C*patch*patch)
  PatchGeometry geom;
};

// Row i is the flattened patch at grid position i, row-major.
PatchMatrix unfold_patches(const Tensor& feat, int patch, int stride);

// Exact inverse of unfold_patches when stride == patch.
Tensor fold_patches(const PatchMatrix& m, int channels, int h, int w);

// Cosine similarity of flattened patches: (N_q, N_k). Zero-norm rows
// contribute zero relevance.
Tensor relevance(const PatchMatrix& q, const PatchMatrix& k);

struct AttentionResult {
  int grid_h = 0;
  int grid_w = 0;
  std::vector<int> hard;    // H[i]: best reference patch per query patch
  std::vector<float> soft;  // S[i]: that maximum relevance, in [-1, 1]
};

// Per-row argmax/max; ties resolved to the lowest reference index.
// grid dims describe the query patch grid (rows of rel, row-major).
AttentionResult attend(const Tensor& rel, int grid_h, int grid_w);
// Convenience for grid-agnostic callers: grid is (N, 1).
AttentionResult attend(const Tensor& rel);

struct TensorPyramid {
  Tensor level1, level2, level3;
};

// Copies attention-selected reference patches at every level. The level-3
// patch size p gives 2p at level 2 and 4p at level 1, so the three grids
// are index-compatible.
TensorPyramid gather_reference(const TensorPyramid& value, const AttentionResult& attn,
                               int patch_l3);

// JSON sidecar {grid:[h,w], H:[...], S:[...]} for visualization tools.
void save_attention_json(const AttentionResult& attn, const std::filesystem::path& file);
AttentionResult load_attention_json(const std::filesystem::path& file);

}  // namespace rdf
