#pragma once

#include <string>

#include "rdf/autodiff.hpp"
#include "rdf/rng.hpp"

namespace rdf::nn {

struct Conv {
  ag::Var w, b;
  int stride = 1;
  int pad = 1;
  ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, w, b, stride, pad); }
};

// Registers weight/bias under <name>.w / <name>.b. rng == nullptr gives
// zero weights; otherwise He-normal scaled by fan-in. Biases start at zero.
inline Conv make_conv(ag::ParamStore& ps, const std::string& name, int cin, int cout, int k,
                      int stride, int pad, Rng* rng) {
  Tensor w({cout, cin, k, k});
  if (rng) {
    const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(rng->normal() * std);
  }
  Conv c;
  c.w = ps.add(name + ".w", std::move(w));
  c.b = ps.add(name + ".b", Tensor::zeros({cout}));
  c.stride = stride;
  c.pad = pad;
  return c;
}

// Fetches an already-registered conv (after checkpoint load).
inline Conv get_conv(ag::ParamStore& ps, const std::string& name, int stride, int pad) {
  auto* w = ps.find(name + ".w");
  auto* b = ps.find(name + ".b");
  if (!w || !b) throw std::logic_error("missing conv params: " + name);
  return Conv{*w, *b, stride, pad};
}

}  // namespace rdf::nn
