#include "rdf/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rdf {

using ag::Var;

void LossWeights::validate() const {
  if (alpha1 < 0.0 || alpha2 < 0.0)
    throw std::invalid_argument("LossWeights: alphas must be >= 0");
}

Var l1_loss(const Var& pred, const Var& target) {
  if (!pred.val().same_shape(target.val()))
    throw std::invalid_argument("l1_loss: shape mismatch");
  return ag::mean_all(ag::abs(ag::sub(pred, target)));
}

namespace {

std::vector<float> gaussian_kernel(int window, double sigma) {
  std::vector<float> k(static_cast<size_t>(window));
  const double c = (window - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    double v = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    k[static_cast<size_t>(i)] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

struct SsimTerms {
  Var luminance_structure;  // full SSIM map
  Var contrast_structure;   // cs map, used by the multi-scale variant
};

SsimTerms ssim_maps(const Var& x, const Var& y, int window, double sigma) {
  const auto k = gaussian_kernel(window, sigma);
  Var mu_x = ag::sep_filter_valid(x, k);
  Var mu_y = ag::sep_filter_valid(y, k);
  Var xx = ag::sep_filter_valid(ag::mul(x, x), k);
  Var yy = ag::sep_filter_valid(ag::mul(y, y), k);
  Var xy = ag::sep_filter_valid(ag::mul(x, y), k);
  Var mu_xy = ag::mul(mu_x, mu_y);
  Var mu_x2 = ag::mul(mu_x, mu_x);
  Var mu_y2 = ag::mul(mu_y, mu_y);
  Var sx = ag::sub(xx, mu_x2);
  Var sy = ag::sub(yy, mu_y2);
  Var sxy = ag::sub(xy, mu_xy);

  Var cs_num = ag::add_scalar(ag::mul_scalar(sxy, 2.0), kC2);
  Var cs_den = ag::add_scalar(ag::add(sx, sy), kC2);
  Var cs = ag::div(cs_num, cs_den);
  Var l_num = ag::add_scalar(ag::mul_scalar(mu_xy, 2.0), kC1);
  Var l_den = ag::add_scalar(ag::add(mu_x2, mu_y2), kC1);
  return {ag::mul(ag::div(l_num, l_den), cs), cs};
}

void check_ssim_inputs(const Var& x, const Var& y, int window) {
  if (!x.val().same_shape(y.val())) throw std::invalid_argument("ssim: shape mismatch");
  if (x.val().rank() != 3) throw std::invalid_argument("ssim: (C,H,W) expected");
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("ssim: window must be odd");
  if (x.val().dim(1) < window || x.val().dim(2) < window)
    throw std::invalid_argument("ssim: image smaller than window");
}

}  // namespace

Var ssim(const Var& x, const Var& y, int window, double sigma) {
  check_ssim_inputs(x, y, window);
  return ag::mean_all(ssim_maps(x, y, window, sigma).luminance_structure);
}

Var ms_ssim(const Var& x, const Var& y, int window, double sigma) {
  check_ssim_inputs(x, y, window);
  static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  int scales = 1;
  int h = x.val().dim(1), w = x.val().dim(2);
  while (scales < 5 && h / 2 >= window && w / 2 >= window) {
    ++scales;
    h /= 2;
    w /= 2;
  }
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += kWeights[s];

  Var cur_x = x, cur_y = y;
  Var acc;  // log-space accumulation via power-weighted product
  for (int s = 0; s < scales; ++s) {
    auto terms = ssim_maps(cur_x, cur_y, window, sigma);
    // negative cs/ssim values are clamped before the fractional power
    Var base = (s == scales - 1) ? terms.luminance_structure : terms.contrast_structure;
    Var factor = ag::pow_scalar(ag::relu(ag::mean_all(base)), kWeights[s] / wsum);
    acc = acc.defined() ? ag::mul(acc, factor) : factor;
    if (s != scales - 1) {
      cur_x = ag::avg_pool2(cur_x);
      cur_y = ag::avg_pool2(cur_y);
    }
  }
  return acc;
}

Var ssim_l1_loss(const Var& pred, const Var& target, LossWeights w, bool multi_scale) {
  w.validate();
  if (!pred.val().same_shape(target.val()))
    throw std::invalid_argument("ssim_l1_loss: shape mismatch");
  int window = std::min({11, pred.val().dim(1), pred.val().dim(2)});
  if (window % 2 == 0) --window;
  Var s = multi_scale ? ms_ssim(pred, target, window) : ssim(pred, target, window);
  Var one_minus = ag::add_scalar(ag::mul_scalar(s, -1.0), 1.0);
  return ag::add(ag::mul_scalar(l1_loss(pred, target), w.alpha1),
                 ag::mul_scalar(one_minus, w.alpha2));
}

double l1_loss_value(const Tensor& pred, const Tensor& target) {
  return l1_loss(Var::leaf(pred), Var::leaf(target)).item();
}

double ssim_value(const Tensor& x, const Tensor& y, int window, double sigma) {
  return ssim(Var::leaf(x), Var::leaf(y), window, sigma).item();
}

}  // namespace rdf
