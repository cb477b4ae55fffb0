#include "rdf/fusion.hpp"

#include <stdexcept>
#include <string>

namespace rdf {

using ag::Var;

FeatureFusion::FeatureFusion(ag::ParamStore& ps, FusionConfig cfg, Rng* rng) : cfg_(cfg) {
  const int c = cfg.base_channels;
  const int ch[3] = {c, 2 * c, 4 * c};
  for (int l = 0; l < 3; ++l) {
    merge_[l] = nn::make_conv(ps, "fusion.merge" + std::to_string(l + 1), 2 * ch[l], ch[l], 3, 1, 1, rng);
  }
  for (int s = 0; s < 3; ++s) {
    const std::string base = "fusion.ex" + std::to_string(s + 1);
    Exchange& e = ex_[s];
    e.up21 = nn::make_conv(ps, base + ".up21", ch[1], ch[0], 1, 1, 0, rng);
    e.up31 = nn::make_conv(ps, base + ".up31", ch[2], ch[0], 1, 1, 0, rng);
    e.up32 = nn::make_conv(ps, base + ".up32", ch[2], ch[1], 1, 1, 0, rng);
    e.down12 = nn::make_conv(ps, base + ".down12", ch[0], ch[1], 3, 2, 1, rng);
    e.down13a = nn::make_conv(ps, base + ".down13a", ch[0], ch[1], 3, 2, 1, rng);
    e.down13b = nn::make_conv(ps, base + ".down13b", ch[1], ch[2], 3, 2, 1, rng);
    e.down23 = nn::make_conv(ps, base + ".down23", ch[1], ch[2], 3, 2, 1, rng);
    for (int l = 0; l < 3; ++l)
      for (int k = 0; k < 4; ++k)
        e.res[l][k] = nn::make_conv(
            ps, base + ".res" + std::to_string(l + 1) + std::to_string(k), ch[l], ch[l], 3, 1, 1, rng);
  }
  head_ = nn::make_conv(ps, "fusion.head", 7 * c, c, 3, 1, 1, rng);
  // final projection starts at zero: residual identity at initialization
  proj_ = nn::make_conv(ps, "fusion.proj", c, 3, 3, 1, 1, nullptr);
}

Var FeatureFusion::soft_reweight(int level, const Var& query, const Var& transferred,
                                 const Var& soft_map) const {
  if (!query.val().same_shape(transferred.val()))
    throw std::invalid_argument("soft_reweight: query/transferred shape mismatch");
  const Var merged = merge_[level - 1](ag::concat_ch({query, transferred}));
  return ag::add(query, ag::mul_map(merged, soft_map));
}

std::array<Var, 3> FeatureFusion::csfi_exchange(int stage, const std::array<Var, 3>& levels) const {
  const Exchange& e = ex_[stage];
  const Var& l1 = levels[0];
  const Var& l2 = levels[1];
  const Var& l3 = levels[2];
  Var n1 = ag::add(l1, ag::add(e.up21(ag::upsample_bilinear(l2, 2)),
                               e.up31(ag::upsample_bilinear(l3, 4))));
  Var n2 = ag::add(l2, ag::add(e.down12(l1), e.up32(ag::upsample_bilinear(l3, 2))));
  Var n3 = ag::add(l3, ag::add(e.down13b(ag::relu(e.down13a(l1))), e.down23(l2)));
  std::array<Var, 3> out = {n1, n2, n3};
  for (int l = 0; l < 3; ++l) {
    Var v = out[l];
    v = ag::add(v, e.res[l][1](ag::relu(e.res[l][0](v))));
    v = ag::add(v, e.res[l][3](ag::relu(e.res[l][2](v))));
    out[l] = v;
  }
  return out;
}

Var FeatureFusion::fuse_and_project(const Var& x_hat, const FeaturePyramid& query,
                                    const std::array<Var, 3>& transferred, const Var& soft_scores,
                                    const AttentionResult& attn) const {
  std::array<Var, 3> levels = {query.level1, query.level2, query.level3};
  const int patches[3] = {4 * cfg_.patch_l3, 2 * cfg_.patch_l3, cfg_.patch_l3};
  const std::array<int, 3> order = cfg_.coarse_to_fine ? std::array<int, 3>{3, 2, 1}
                                                       : std::array<int, 3>{1, 2, 3};
  for (int stage = 0; stage < 3; ++stage) {
    const int lvl = order[stage];
    const Var soft_map =
        ag::broadcast_patch_map(soft_scores, attn.grid_h, attn.grid_w, patches[lvl - 1]);
    levels[lvl - 1] = soft_reweight(lvl, levels[lvl - 1], transferred[lvl - 1], soft_map);
    levels = csfi_exchange(stage, levels);
  }
  Var cat = ag::concat_ch(
      {levels[0], ag::upsample_bilinear(levels[1], 2), ag::upsample_bilinear(levels[2], 4)});
  Var residual = proj_(ag::relu(head_(cat)));
  return ag::clamp01(ag::add(x_hat, residual));
}

}  // namespace rdf
