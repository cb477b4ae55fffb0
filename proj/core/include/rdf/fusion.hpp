#pragma once

#include <array>

#include "rdf/attention.hpp"
#include "rdf/autodiff.hpp"
#include "rdf/extractor.hpp"
#include "rdf/nn.hpp"

namespace rdf {

struct FusionConfig {
  int base_channels = 16;
  int patch_l3 = 1;           // level-3 attention patch size
  bool coarse_to_fine = false;  // compensation order 3->1 instead of the default 1->3
};

// Soft-attention re-weighting, cross-scale feature integration (CSFI) with
// residual blocks after each compensation step, and back-projection to the
// image. With all parameters zero the whole module is the identity: the
// output equals the de-rained input image bit for bit.
class FeatureFusion {
 public:
  // Registers parameters under "fusion.*". rng == nullptr zeros everything;
  // otherwise inner convs are He-initialized and the final projection conv
  // stays zero so training starts from the identity.
  FeatureFusion(ag::ParamStore& ps, FusionConfig cfg, Rng* rng);

  // query + merge(concat(query, transferred)) * soft_map
  ag::Var soft_reweight(int level, const ag::Var& query, const ag::Var& transferred,
                        const ag::Var& soft_map) const;

  // out_l = resblocks(in_l + sum of resampled other levels); stage selects
  // one of the three independently parameterized exchange instances.
  std::array<ag::Var, 3> csfi_exchange(int stage, const std::array<ag::Var, 3>& levels) const;

  // Full path: per-level compensation interleaved with exchanges, then
  // upsample-concat-project; returns clamp01(x_hat + residual).
  ag::Var fuse_and_project(const ag::Var& x_hat, const FeaturePyramid& query,
                           const std::array<ag::Var, 3>& transferred, const ag::Var& soft_scores,
                           const AttentionResult& attn) const;

  const FusionConfig& config() const { return cfg_; }

 private:
  FusionConfig cfg_;
  std::array<nn::Conv, 3> merge_;                    // per-level 2C_l -> C_l
  struct Exchange {
    nn::Conv up21, up31, up32;                       // 1x1 after bilinear upsample
    nn::Conv down12, down13a, down13b, down23;       // stride-2 3x3
    std::array<std::array<nn::Conv, 4>, 3> res;      // 2 residual blocks x 2 convs per level
  };
  std::array<Exchange, 3> ex_;
  nn::Conv head_, proj_;
};

}  // namespace rdf
