#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rdf/tensor.hpp"

namespace rdf::ag {

// Reverse-mode autodiff over Tensor. Ops build a tape of shared Nodes;
// backward() walks it once in reverse topological order. All forward
// kernels are deterministic and single-threaded.
struct Node {
  Tensor val;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool has_dval = false;
  double dval = 0.0;  // double-accumulated value for scalar reductions
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backfn;

  Tensor& grad_buf();  // zero tensor of val's shape on first use
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}
  static Var leaf(Tensor t, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Tensor& val() const { return n_->val; }
  Tensor& mut_val() { return n_->val; }
  Tensor& grad() { return n_->grad_buf(); }
  bool requires_grad() const { return n_->requires_grad; }
  // Scalar value; double-accumulated when produced by a reduction.
  double item() const;
  const std::shared_ptr<Node>& node() const { return n_; }

 private:
  std::shared_ptr<Node> n_;
};

// Runs reverse accumulation from a scalar loss (seed gradient 1).
void backward(const Var& loss);

// ----- elementwise -----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double c);
Var mul_scalar(const Var& a, double c);
Var abs(const Var& a);
// elementwise x^c for x >= 0 (gradient 0 at x == 0)
Var pow_scalar(const Var& a, double c);
Var relu(const Var& a);
Var clamp01(const Var& a);
// (C,H,W) * (1,H,W), map broadcast across channels
Var mul_map(const Var& x, const Var& m);

// ----- reductions -----
Var mean_all(const Var& a);

// ----- matrices -----
// (M,K) x (N,K)^T -> (M,N)
Var matmul_nt(const Var& a, const Var& b);
// L2-normalize each row; rows with zero norm map to zero rows
Var normalize_rows(const Var& a);

// ----- conv / resampling -----
// x (Cin,H,W), w (Cout,Cin,kh,kw), b (Cout); zero padding
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample_bilinear(const Var& x, int factor);
Var avg_pool2(const Var& x);
Var concat_ch(const std::vector<Var>& xs);
Var reflect_pad(const Var& x, int top, int bottom, int left, int right);
Var crop(const Var& x, int y0, int x0, int h, int w);
// depthwise separable valid correlation with a fixed 1-D kernel (both axes)
Var sep_filter_valid(const Var& x, const std::vector<float>& k);

// ----- patches / attention -----
// (C,H,W) -> (N, C*patch*patch); sliding windows, row-major grid
Var unfold(const Var& x, int patch, int stride);
// inverse of unfold for stride == patch (exact partition)
Var fold(const Var& rows, int channels, int height, int width, int patch);
Var gather_rows(const Var& a, const std::vector<int>& idx);
// per-row max and argmax (ties -> lowest index)
std::pair<Var, std::vector<int>> row_max(const Var& a);
// per-patch scores (N) -> dense map (1, grid_h*patch, grid_w*patch)
Var broadcast_patch_map(const Var& s, int grid_h, int grid_w, int patch);

// ----- parameters -----
// Ordered parameter table; iteration order is insertion order, which makes
// optimizer updates and checkpoints deterministic.
class ParamStore {
 public:
  Var& add(const std::string& name, Tensor init);
  Var* find(const std::string& name);
  const Var* find(const std::string& name) const;
  std::vector<std::pair<std::string, Var>>& items() { return items_; }
  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
  size_t size() const { return items_.size(); }
  void zero_grads();
  bool all_finite() const;

 private:
  std::vector<std::pair<std::string, Var>> items_;
};

class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamStore& params);
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace rdf::ag
