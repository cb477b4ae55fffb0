#include "rdf/extractor.hpp"

#include <stdexcept>

namespace rdf {

FeatureExtractor::FeatureExtractor(ag::ParamStore& ps, int base_channels, Rng* rng)
    : base_channels_(base_channels) {
  if (base_channels < 1) throw std::invalid_argument("extractor: base_channels must be >= 1");
  const int c = base_channels;
  l1c1_ = nn::make_conv(ps, "extractor.l1c1", 3, c, 3, 1, 1, rng);
  l1c2_ = nn::make_conv(ps, "extractor.l1c2", c, c, 3, 1, 1, rng);
  down1_ = nn::make_conv(ps, "extractor.down1", c, 2 * c, 3, 2, 1, rng);
  l2c1_ = nn::make_conv(ps, "extractor.l2c1", 2 * c, 2 * c, 3, 1, 1, rng);
  l2c2_ = nn::make_conv(ps, "extractor.l2c2", 2 * c, 2 * c, 3, 1, 1, rng);
  down2_ = nn::make_conv(ps, "extractor.down2", 2 * c, 4 * c, 3, 2, 1, rng);
  l3c1_ = nn::make_conv(ps, "extractor.l3c1", 4 * c, 4 * c, 3, 1, 1, rng);
  l3c2_ = nn::make_conv(ps, "extractor.l3c2", 4 * c, 4 * c, 3, 1, 1, rng);
}

FeaturePyramid FeatureExtractor::extract(const ag::Var& img) const {
  const Tensor& t = img.val();
  if (t.rank() != 3 || t.dim(0) != 3)
    throw std::invalid_argument("extract: (3,H,W) image expected");
  if (t.dim(1) % 4 || t.dim(2) % 4)
    throw std::invalid_argument("extract: H and W must be divisible by 4, got " + t.shape_str());
  FeaturePyramid p;
  p.level1 = ag::relu(l1c2_(ag::relu(l1c1_(img))));
  p.level2 = ag::relu(l2c2_(ag::relu(l2c1_(ag::relu(down1_(p.level1))))));
  p.level3 = ag::relu(l3c2_(ag::relu(l3c1_(ag::relu(down2_(p.level2))))));
  return p;
}

}  // namespace rdf
