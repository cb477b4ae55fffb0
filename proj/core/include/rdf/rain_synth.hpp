#pragma once

#include <cstdint>
#include <filesystem>

#include "rdf/image.hpp"
#include "rdf/manifest.hpp"

namespace rdf {

struct RainParams {
  int streak_count = 60;
  int streak_length_px = 12;
  double angle_deg = 20.0;  // from vertical, [-45, 45]
  double intensity = 0.35;  // additive brightness, [0, 1]
  double blur_sigma = 0.7;  // >= 0
  uint64_t seed = 0;

  void validate() const;
};

// Additive oriented streaks with Gaussian blur, clipped to [0,1].
// Deterministic in (clean, params); streak_count == 0 or intensity == 0
// returns the input unchanged, bit for bit.
Image synthesize_streaks(const Image& clean, const RainParams& params);

struct SplitFractions {
  double train = 0.75;
  double test = 0.25;
};

// Rains every decodable image in clean_dir and writes
//   out_dir/manifest.json, out_dir/data/clean/<id>.png, out_dir/data/rainy/<id>.png
// Per-sample rain seeds are derived from (global_seed, sample id), so the
// result is independent of processing order. Undecodable files are skipped
// and noted in the manifest log.
DatasetManifest make_dataset(const std::filesystem::path& clean_dir,
                             const std::filesystem::path& out_dir, const RainParams& params,
                             SplitFractions splits, uint64_t global_seed);

}  // namespace rdf
