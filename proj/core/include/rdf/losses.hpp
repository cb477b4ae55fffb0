#pragma once

#include "rdf/autodiff.hpp"
#include "rdf/tensor.hpp"

namespace rdf {

struct LossWeights {
  double alpha1 = 0.6;
  double alpha2 = 0.4;

  void validate() const;
};

// Mean absolute difference over all elements.
ag::Var l1_loss(const ag::Var& pred, const ag::Var& target);

// Single-scale SSIM with a Gaussian window (valid region), stabilizers
// C1 = 0.01^2, C2 = 0.03^2 on the [0,1] range, averaged over channels.
// Requires H, W >= window. Symmetric in (x, y); ssim(x, x) == 1.
ag::Var ssim(const ag::Var& x, const ag::Var& y, int window = 11, double sigma = 1.5);

// Multi-scale SSIM (power-weighted product over dyadic scales). The scale
// count is clamped so the window always fits; available behind a config
// flag for parity experiments.
ag::Var ms_ssim(const ag::Var& x, const ag::Var& y, int window = 11, double sigma = 1.5);

// alpha1 * L1 + alpha2 * (1 - SSIM). The SSIM window shrinks to the
// largest odd size <= min(11, H, W) so small images remain valid inputs.
ag::Var ssim_l1_loss(const ag::Var& pred, const ag::Var& target, LossWeights w,
                     bool multi_scale = false);

// Tensor-level conveniences (no gradients).
double l1_loss_value(const Tensor& pred, const Tensor& target);
double ssim_value(const Tensor& x, const Tensor& y, int window = 11, double sigma = 1.5);

}  // namespace rdf
