#pragma once

#include "rdf/autodiff.hpp"
#include "rdf/nn.hpp"
#include "rdf/rng.hpp"

namespace rdf {

// Three-level feature pyramid: (C,H,W), (2C,H/2,W/2), (4C,H/4,W/4).
struct FeaturePyramid {
  ag::Var level1, level2, level3;

  ag::Var& level(int i) {
    return i == 1 ? level1 : (i == 2 ? level2 : level3);
  }
  const ag::Var& level(int i) const {
    return i == 1 ? level1 : (i == 2 ? level2 : level3);
  }
};

// Shared projector applied to all three pipeline images. Two 3x3 conv+relu
// blocks per level, stride-2 conv between levels.
class FeatureExtractor {
 public:
  // Registers parameters under "extractor.*" in ps. rng == nullptr zeros them.
  FeatureExtractor(ag::ParamStore& ps, int base_channels, Rng* rng);

  // img (3,H,W) with H, W divisible by 4.
  FeaturePyramid extract(const ag::Var& img) const;
  int base_channels() const { return base_channels_; }

 private:
  int base_channels_;
  nn::Conv l1c1_, l1c2_, down1_, l2c1_, l2c2_, down2_, l3c1_, l3c2_;
};

}  // namespace rdf
