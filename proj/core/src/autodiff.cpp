#include "rdf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace rdf::ag {

namespace {

// C[M,N] += A[M,K] * B[K,N]
void gemm_acc(int M, int N, int K, const float* A, const float* B, float* C) {
  for (int m = 0; m < M; ++m) {
    const float* a = A + static_cast<size_t>(m) * K;
    float* c = C + static_cast<size_t>(m) * N;
    for (int k = 0; k < K; ++k) {
      const float av = a[k];
      if (av == 0.0f) continue;
      const float* b = B + static_cast<size_t>(k) * N;
      for (int n = 0; n < N; ++n) c[n] += av * b[n];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt_acc(int M, int N, int K, const float* A, const float* B, float* C) {
  for (int m = 0; m < M; ++m) {
    const float* a = A + static_cast<size_t>(m) * K;
    float* c = C + static_cast<size_t>(m) * N;
    for (int n = 0; n < N; ++n) {
      const float* b = B + static_cast<size_t>(n) * K;
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc += static_cast<double>(a[k]) * b[k];
      c[n] += static_cast<float>(acc);
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
void gemm_tn_acc(int M, int N, int K, const float* A, const float* B, float* C) {
  for (int m = 0; m < M; ++m) {
    const float* a = A + static_cast<size_t>(m) * K;
    const float* b = B + static_cast<size_t>(m) * N;
    for (int k = 0; k < K; ++k) {
      const float av = a[k];
      if (av == 0.0f) continue;
      float* c = C + static_cast<size_t>(k) * N;
      for (int n = 0; n < N; ++n) c[n] += av * b[n];
    }
  }
}

Var make_node(Tensor val, std::vector<std::shared_ptr<Node>> parents,
              std::function<void(Node&)> backfn) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->backfn = std::move(backfn);
  return Var(n);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.val().same_shape(b.val())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.val().shape_str() + " vs " + b.val().shape_str());
  }
}

bool is_scalar(const Var& v) { return v.val().numel() == 1; }

double dval_of(const Var& v) {
  return v.node()->has_dval ? v.node()->dval : static_cast<double>(v.val()[0]);
}

void set_dval(const Var& out, double d) {
  out.node()->dval = d;
  out.node()->has_dval = true;
}

}  // namespace

Tensor& Node::grad_buf() {
  if (grad.numel() == 0) grad = Tensor::zeros(val.shape());
  return grad;
}

Var Var::leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->requires_grad = requires_grad;
  return Var(n);
}

double Var::item() const {
  if (n_->val.numel() != 1) throw std::logic_error("item(): not a scalar");
  return n_->has_dval ? n_->dval : static_cast<double>(n_->val[0]);
}

void backward(const Var& loss) {
  if (loss.val().numel() != 1) throw std::logic_error("backward(): loss must be scalar");
  // iterative post-order DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->grad_buf()[0] = 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backfn && n->grad.numel() != 0) n->backfn(*n);
  }
}

// ----- elementwise -----

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor y = a.val();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] += b.val()[i];
  auto out = make_node(std::move(y), {a.node(), b.node()}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
  if (is_scalar(out)) set_dval(out, dval_of(a) + dval_of(b));
  return out;
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor y = a.val();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] -= b.val()[i];
  auto out = make_node(std::move(y), {a.node(), b.node()}, [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      Tensor& g = pa->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
    }
  });
  if (is_scalar(out)) set_dval(out, dval_of(a) - dval_of(b));
  return out;
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor y = a.val();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] *= b.val()[i];
  auto out = make_node(std::move(y), {a.node(), b.node()}, [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      Tensor& g = pa->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * pb->val[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * pa->val[i];
    }
  });
  if (is_scalar(out)) set_dval(out, dval_of(a) * dval_of(b));
  return out;
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor y = a.val();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] /= b.val()[i];
  auto out = make_node(std::move(y), {a.node(), b.node()}, [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      Tensor& g = pa->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] / pb->val[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->grad_buf();
      for (int64_t i = 0; i < g.numel(); ++i) {
        float bv = pb->val[i];
        g[i] -= self.grad[i] * pa->val[i] / (bv * bv);
      }
    }
  });
  if (is_scalar(out)) set_dval(out, dval_of(a) / dval_of(b));
  return out;
}

Var add_scalar(const Var& a, double c) {
  Tensor y = a.val();
  const float cf = static_cast<float>(c);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] += cf;
  auto out = make_node(std::move(y), {a.node()}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
  if (is_scalar(out)) set_dval(out, dval_of(a) + c);
  return out;
}

Var mul_scalar(const Var& a, double c) {
  Tensor y = a.val();
  const float cf = static_cast<float>(c);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] *= cf;
  auto out = make_node(std::move(y), {a.node()}, [cf](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += cf * self.grad[i];
  });
  if (is_scalar(out)) set_dval(out, dval_of(a) * c);
  return out;
}

Var abs(const Var& a) {
  Tensor y = a.val();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::fabs(y[i]);
  return make_node(std::move(y), {a.node()}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    const Tensor& x = self.parents[0]->val;
    for (int64_t i = 0; i < g.numel(); ++i) {
      float s = x[i] > 0.0f ? 1.0f : (x[i] < 0.0f ? -1.0f : 0.0f);
      g[i] += s * self.grad[i];
    }
  });
}

Var pow_scalar(const Var& a, double c) {
  Tensor y = a.val();
  for (int64_t i = 0; i < y.numel(); ++i)
    y[i] = static_cast<float>(std::pow(static_cast<double>(y[i]), c));
  auto out = make_node(std::move(y), {a.node()}, [c](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    const Tensor& x = self.parents[0]->val;
    for (int64_t i = 0; i < g.numel(); ++i) {
      if (x[i] > 0.0f)
        g[i] += static_cast<float>(c * std::pow(static_cast<double>(x[i]), c - 1.0)) * self.grad[i];
    }
  });
  if (is_scalar(out)) set_dval(out, std::pow(dval_of(a), c));
  return out;
}

Var relu(const Var& a) {
  Tensor y = a.val();
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::max(y[i], 0.0f);
  auto out = make_node(std::move(y), {a.node()}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    const Tensor& x = self.parents[0]->val;
    for (int64_t i = 0; i < g.numel(); ++i) {
      if (x[i] > 0.0f) g[i] += self.grad[i];
    }
  });
  if (is_scalar(out)) set_dval(out, std::max(dval_of(a), 0.0));
  return out;
}

Var clamp01(const Var& a) {
  Tensor y = a.val();
  for (int64_t i = 0; i < y.numel(); ++i) {
    float v = std::clamp(y[i], 0.0f, 1.0f);
    y[i] = (v == 0.0f) ? 0.0f : v;  // normalize -0
  }
  return make_node(std::move(y), {a.node()}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    const Tensor& x = self.parents[0]->val;
    for (int64_t i = 0; i < g.numel(); ++i) {
      if (x[i] >= 0.0f && x[i] <= 1.0f) g[i] += self.grad[i];
    }
  });
}

Var mul_map(const Var& x, const Var& m) {
  const Tensor& xv = x.val();
  const Tensor& mv = m.val();
  if (xv.rank() != 3 || mv.rank() != 3 || mv.dim(0) != 1 || mv.dim(1) != xv.dim(1) ||
      mv.dim(2) != xv.dim(2)) {
    throw std::invalid_argument("mul_map: need (C,H,W) and (1,H,W)");
  }
  const int C = xv.dim(0);
  const int64_t plane = static_cast<int64_t>(xv.dim(1)) * xv.dim(2);
  Tensor y = xv;
  for (int c = 0; c < C; ++c)
    for (int64_t i = 0; i < plane; ++i) y[c * plane + i] *= mv[i];
  return make_node(std::move(y), {x.node(), m.node()}, [C, plane](Node& self) {
    auto& px = self.parents[0];
    auto& pm = self.parents[1];
    if (px->requires_grad) {
      Tensor& g = px->grad_buf();
      for (int c = 0; c < C; ++c)
        for (int64_t i = 0; i < plane; ++i)
          g[c * plane + i] += self.grad[c * plane + i] * pm->val[i];
    }
    if (pm->requires_grad) {
      Tensor& g = pm->grad_buf();
      for (int c = 0; c < C; ++c)
        for (int64_t i = 0; i < plane; ++i)
          g[i] += self.grad[c * plane + i] * px->val[c * plane + i];
    }
  });
}

// ----- reductions -----

Var mean_all(const Var& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a.val().numel(); ++i) s += a.val()[i];
  const double n = static_cast<double>(a.val().numel());
  Tensor y = Tensor::scalar(static_cast<float>(s / n));
  auto out = make_node(std::move(y), {a.node()}, [n](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    const float gs = self.grad[0] / static_cast<float>(n);
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += gs;
  });
  set_dval(out, s / n);
  return out;
}

// ----- matrices -----

Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
    throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  const int M = av.dim(0), N = bv.dim(0), K = av.dim(1);
  Tensor y({M, N});
  gemm_nt_acc(M, N, K, av.data(), bv.data(), y.data());
  return make_node(std::move(y), {a.node(), b.node()}, [M, N, K](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad)  // da[M,K] += dy[M,N] * b[N,K]
      gemm_acc(M, K, N, self.grad.data(), pb->val.data(), pa->grad_buf().data());
    if (pb->requires_grad)  // db[N,K] += dy[M,N]^T * a[M,K]
      gemm_tn_acc(M, K, N, self.grad.data(), pa->val.data(), pb->grad_buf().data());
  });
}

Var normalize_rows(const Var& a) {
  const Tensor& av = a.val();
  if (av.rank() != 2) throw std::invalid_argument("normalize_rows: rank-2 expected");
  const int N = av.dim(0), D = av.dim(1);
  Tensor y({N, D});
  std::vector<double> norms(static_cast<size_t>(N), 0.0);
  for (int r = 0; r < N; ++r) {
    double s = 0.0;
    for (int c = 0; c < D; ++c) {
      double v = av.at(r, c);
      s += v * v;
    }
    double nrm = std::sqrt(s);
    norms[r] = nrm;
    if (nrm > 0.0) {
      for (int c = 0; c < D; ++c) y.at(r, c) = static_cast<float>(av.at(r, c) / nrm);
    }
  }
  return make_node(std::move(y), {a.node()}, [N, D, norms](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    const Tensor& x = self.parents[0]->val;
    for (int r = 0; r < N; ++r) {
      const double nrm = norms[r];
      if (nrm <= 0.0) continue;
      double gdotx = 0.0;
      for (int c = 0; c < D; ++c)
        gdotx += static_cast<double>(self.grad.at(r, c)) * x.at(r, c);
      const double n3 = nrm * nrm * nrm;
      for (int c = 0; c < D; ++c) {
        g.at(r, c) += static_cast<float>(self.grad.at(r, c) / nrm - x.at(r, c) * gdotx / n3);
      }
    }
  });
}

// ----- conv / resampling -----

namespace {

struct ConvGeom {
  int cin, h, w, cout, kh, kw, stride, pad, hout, wout;
};

// cols (Cin*kh*kw, Hout*Wout)
void im2col(const Tensor& x, const ConvGeom& g, Tensor& cols) {
  const int N = g.hout * g.wout;
  for (int c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const int row = (c * g.kh + ky) * g.kw + kx;
        float* dst = cols.data() + static_cast<size_t>(row) * N;
        for (int oy = 0; oy < g.hout; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) {
            for (int ox = 0; ox < g.wout; ++ox) dst[oy * g.wout + ox] = 0.0f;
            continue;
          }
          for (int ox = 0; ox < g.wout; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[oy * g.wout + ox] = (ix < 0 || ix >= g.w) ? 0.0f : x.at(c, iy, ix);
          }
        }
      }
    }
  }
}

void col2im_acc(const Tensor& cols, const ConvGeom& g, Tensor& dx) {
  const int N = g.hout * g.wout;
  for (int c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const int row = (c * g.kh + ky) * g.kw + kx;
        const float* src = cols.data() + static_cast<size_t>(row) * N;
        for (int oy = 0; oy < g.hout; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (int ox = 0; ox < g.wout; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.w) continue;
            dx.at(c, iy, ix) += src[oy * g.wout + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& xv = x.val();
  const Tensor& wv = w.val();
  if (xv.rank() != 3 || wv.rank() != 4) throw std::invalid_argument("conv2d: bad ranks");
  if (wv.dim(1) != xv.dim(0))
    throw std::invalid_argument("conv2d: channel mismatch");
  ConvGeom g{};
  g.cin = xv.dim(0);
  g.h = xv.dim(1);
  g.w = xv.dim(2);
  g.cout = wv.dim(0);
  g.kh = wv.dim(2);
  g.kw = wv.dim(3);
  g.stride = stride;
  g.pad = pad;
  g.hout = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wout = (g.w + 2 * pad - g.kw) / stride + 1;
  if (g.hout <= 0 || g.wout <= 0) throw std::invalid_argument("conv2d: output would be empty");

  const int K = g.cin * g.kh * g.kw;
  const int N = g.hout * g.wout;
  Tensor cols({K, N});
  im2col(xv, g, cols);
  Tensor y({g.cout, g.hout, g.wout});
  for (int co = 0; co < g.cout; ++co) {
    float* dst = y.data() + static_cast<size_t>(co) * N;
    const float bias = b.val()[co];
    for (int i = 0; i < N; ++i) dst[i] = bias;
  }
  gemm_acc(g.cout, N, K, wv.data(), cols.data(), y.data());

  // cols is recomputed in backward to keep tape memory flat
  return make_node(std::move(y), {x.node(), w.node(), b.node()}, [g, K, N](Node& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    auto& pb = self.parents[2];
    if (pb->requires_grad) {
      Tensor& db = pb->grad_buf();
      for (int co = 0; co < g.cout; ++co) {
        double s = 0.0;
        const float* gp = self.grad.data() + static_cast<size_t>(co) * N;
        for (int i = 0; i < N; ++i) s += gp[i];
        db[co] += static_cast<float>(s);
      }
    }
    if (pw->requires_grad || px->requires_grad) {
      Tensor cols({K, N});
      im2col(px->val, g, cols);
      if (pw->requires_grad)  // dw[Cout,K] += dy[Cout,N] * cols[K,N]^T
        gemm_nt_acc(g.cout, K, N, self.grad.data(), cols.data(), pw->grad_buf().data());
      if (px->requires_grad) {
        Tensor dcols({K, N});  // dcols = w^T[K,Cout] * dy[Cout,N]
        gemm_tn_acc(g.cout, N, K, pw->val.data(), self.grad.data(), dcols.data());
        col2im_acc(dcols, g, px->grad_buf());
      }
    }
  });
}

namespace {
struct LinTap {
  int i0, i1;
  float w0, w1;
};
std::vector<LinTap> bilinear_taps(int out_n, int in_n, int factor) {
  std::vector<LinTap> taps(static_cast<size_t>(out_n));
  for (int o = 0; o < out_n; ++o) {
    float src = (o + 0.5f) / factor - 0.5f;
    float clamped = std::clamp(src, 0.0f, static_cast<float>(in_n - 1));
    int i0 = static_cast<int>(std::floor(clamped));
    int i1 = std::min(i0 + 1, in_n - 1);
    float t = clamped - i0;
    taps[o] = {i0, i1, 1.0f - t, t};
  }
  return taps;
}
}  // namespace

Var upsample_bilinear(const Var& x, int factor) {
  const Tensor& xv = x.val();
  if (xv.rank() != 3) throw std::invalid_argument("upsample_bilinear: rank-3 expected");
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const int Ho = H * factor, Wo = W * factor;
  auto ty = bilinear_taps(Ho, H, factor);
  auto tx = bilinear_taps(Wo, W, factor);
  Tensor y({C, Ho, Wo});
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < Ho; ++oy) {
      const auto& a = ty[oy];
      for (int ox = 0; ox < Wo; ++ox) {
        const auto& bt = tx[ox];
        y.at(c, oy, ox) = a.w0 * (bt.w0 * xv.at(c, a.i0, bt.i0) + bt.w1 * xv.at(c, a.i0, bt.i1)) +
                          a.w1 * (bt.w0 * xv.at(c, a.i1, bt.i0) + bt.w1 * xv.at(c, a.i1, bt.i1));
      }
    }
  return make_node(std::move(y), {x.node()}, [C, Ho, Wo, ty, tx](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < Ho; ++oy) {
        const auto& a = ty[oy];
        for (int ox = 0; ox < Wo; ++ox) {
          const auto& bt = tx[ox];
          const float gv = self.grad.at(c, oy, ox);
          g.at(c, a.i0, bt.i0) += a.w0 * bt.w0 * gv;
          g.at(c, a.i0, bt.i1) += a.w0 * bt.w1 * gv;
          g.at(c, a.i1, bt.i0) += a.w1 * bt.w0 * gv;
          g.at(c, a.i1, bt.i1) += a.w1 * bt.w1 * gv;
        }
      }
  });
}

Var avg_pool2(const Var& x) {
  const Tensor& xv = x.val();
  if (xv.rank() != 3 || xv.dim(1) % 2 || xv.dim(2) % 2)
    throw std::invalid_argument("avg_pool2: even (C,H,W) expected");
  const int C = xv.dim(0), H = xv.dim(1) / 2, W = xv.dim(2) / 2;
  Tensor y({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < H; ++oy)
      for (int ox = 0; ox < W; ++ox)
        y.at(c, oy, ox) = 0.25f * (xv.at(c, 2 * oy, 2 * ox) + xv.at(c, 2 * oy, 2 * ox + 1) +
                                   xv.at(c, 2 * oy + 1, 2 * ox) + xv.at(c, 2 * oy + 1, 2 * ox + 1));
  return make_node(std::move(y), {x.node()}, [C, H, W](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < H; ++oy)
        for (int ox = 0; ox < W; ++ox) {
          const float gv = 0.25f * self.grad.at(c, oy, ox);
          g.at(c, 2 * oy, 2 * ox) += gv;
          g.at(c, 2 * oy, 2 * ox + 1) += gv;
          g.at(c, 2 * oy + 1, 2 * ox) += gv;
          g.at(c, 2 * oy + 1, 2 * ox + 1) += gv;
        }
  });
}

Var concat_ch(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_ch: empty");
  const int H = xs[0].val().dim(1), W = xs[0].val().dim(2);
  int C = 0;
  for (const auto& v : xs) {
    if (v.val().rank() != 3 || v.val().dim(1) != H || v.val().dim(2) != W)
      throw std::invalid_argument("concat_ch: spatial mismatch");
    C += v.val().dim(0);
  }
  Tensor y({C, H, W});
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<int> offsets;
  int64_t off = 0;
  const int64_t plane = static_cast<int64_t>(H) * W;
  for (const auto& v : xs) {
    offsets.push_back(static_cast<int>(off / plane));
    const Tensor& t = v.val();
    std::copy(t.data(), t.data() + t.numel(), y.data() + off);
    off += t.numel();
    parents.push_back(v.node());
  }
  return make_node(std::move(y), std::move(parents), [plane, offsets](Node& self) {
    for (size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buf();
      const int64_t base = offsets[k] * plane;
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[base + i];
    }
  });
}

namespace {
inline int reflect_idx(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}
}  // namespace

Var reflect_pad(const Var& x, int top, int bottom, int left, int right) {
  const Tensor& xv = x.val();
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  if (top >= H || bottom >= H || left >= W || right >= W)
    throw std::invalid_argument("reflect_pad: pad must be smaller than the image");
  const int Ho = H + top + bottom, Wo = W + left + right;
  Tensor y({C, Ho, Wo});
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < Ho; ++oy) {
      const int iy = reflect_idx(oy - top, H);
      for (int ox = 0; ox < Wo; ++ox) y.at(c, oy, ox) = xv.at(c, iy, reflect_idx(ox - left, W));
    }
  return make_node(std::move(y), {x.node()}, [C, H, W, Ho, Wo, top, left](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < Ho; ++oy) {
        const int iy = reflect_idx(oy - top, H);
        for (int ox = 0; ox < Wo; ++ox)
          g.at(c, iy, reflect_idx(ox - left, W)) += self.grad.at(c, oy, ox);
      }
  });
}

Var crop(const Var& x, int y0, int x0, int h, int w) {
  const Tensor& xv = x.val();
  const int C = xv.dim(0);
  if (y0 < 0 || x0 < 0 || y0 + h > xv.dim(1) || x0 + w > xv.dim(2))
    throw std::invalid_argument("crop: out of bounds");
  Tensor y({C, h, w});
  for (int c = 0; c < C; ++c)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) y.at(c, yy, xx) = xv.at(c, y0 + yy, x0 + xx);
  return make_node(std::move(y), {x.node()}, [C, y0, x0, h, w](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int c = 0; c < C; ++c)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) g.at(c, y0 + yy, x0 + xx) += self.grad.at(c, yy, xx);
  });
}

Var sep_filter_valid(const Var& x, const std::vector<float>& k) {
  const Tensor& xv = x.val();
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const int K = static_cast<int>(k.size());
  if (H < K || W < K) throw std::invalid_argument("sep_filter_valid: image smaller than kernel");
  const int Ho = H - K + 1, Wo = W - K + 1;
  // horizontal then vertical pass
  Tensor tmp({C, H, Wo});
  for (int c = 0; c < C; ++c)
    for (int yy = 0; yy < H; ++yy)
      for (int ox = 0; ox < Wo; ++ox) {
        double s = 0.0;
        for (int j = 0; j < K; ++j) s += static_cast<double>(k[j]) * xv.at(c, yy, ox + j);
        tmp.at(c, yy, ox) = static_cast<float>(s);
      }
  Tensor y({C, Ho, Wo});
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        double s = 0.0;
        for (int j = 0; j < K; ++j) s += static_cast<double>(k[j]) * tmp.at(c, oy + j, ox);
        y.at(c, oy, ox) = static_cast<float>(s);
      }
  return make_node(std::move(y), {x.node()}, [C, H, W, Ho, Wo, K, k](Node& self) {
    // transpose of the two passes: scatter vertical, then horizontal
    Tensor dtmp({C, H, Wo});
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          const float gv = self.grad.at(c, oy, ox);
          if (gv == 0.0f) continue;
          for (int j = 0; j < K; ++j) dtmp.at(c, oy + j, ox) += k[j] * gv;
        }
    Tensor& g = self.parents[0]->grad_buf();
    for (int c = 0; c < C; ++c)
      for (int yy = 0; yy < H; ++yy)
        for (int ox = 0; ox < Wo; ++ox) {
          const float gv = dtmp.at(c, yy, ox);
          if (gv == 0.0f) continue;
          for (int j = 0; j < K; ++j) g.at(c, yy, ox + j) += k[j] * gv;
        }
  });
}

// ----- patches / attention -----

Var unfold(const Var& x, int patch, int stride) {
  const Tensor& xv = x.val();
  if (xv.rank() != 3) throw std::invalid_argument("unfold: rank-3 expected");
  const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  if (stride < 1 || patch < stride) throw std::invalid_argument("unfold: need patch >= stride >= 1");
  if (H % stride || W % stride || H < patch || W < patch || (H - patch) % stride ||
      (W - patch) % stride)
    throw std::invalid_argument("unfold: dims not divisible by stride");
  const int gh = (H - patch) / stride + 1, gw = (W - patch) / stride + 1;
  const int N = gh * gw, D = C * patch * patch;
  Tensor y({N, D});
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      float* row = y.data() + static_cast<size_t>(gy * gw + gx) * D;
      int d = 0;
      for (int c = 0; c < C; ++c)
        for (int py = 0; py < patch; ++py)
          for (int px = 0; px < patch; ++px)
            row[d++] = xv.at(c, gy * stride + py, gx * stride + px);
    }
  return make_node(std::move(y), {x.node()}, [C, patch, stride, gh, gw, D](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx) {
        const float* row = self.grad.data() + static_cast<size_t>(gy * gw + gx) * D;
        int d = 0;
        for (int c = 0; c < C; ++c)
          for (int py = 0; py < patch; ++py)
            for (int px = 0; px < patch; ++px)
              g.at(c, gy * stride + py, gx * stride + px) += row[d++];
      }
  });
}

Var fold(const Var& rows, int channels, int height, int width, int patch) {
  const Tensor& rv = rows.val();
  if (rv.rank() != 2) throw std::invalid_argument("fold: rank-2 expected");
  if (height % patch || width % patch) throw std::invalid_argument("fold: dims not divisible");
  const int gh = height / patch, gw = width / patch;
  const int N = gh * gw, D = channels * patch * patch;
  if (rv.dim(0) != N || rv.dim(1) != D) throw std::invalid_argument("fold: geometry mismatch");
  Tensor y({channels, height, width});
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      const float* row = rv.data() + static_cast<size_t>(gy * gw + gx) * D;
      int d = 0;
      for (int c = 0; c < channels; ++c)
        for (int py = 0; py < patch; ++py)
          for (int px = 0; px < patch; ++px)
            y.at(c, gy * patch + py, gx * patch + px) = row[d++];
    }
  return make_node(std::move(y), {rows.node()}, [channels, patch, gh, gw, D](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx) {
        float* row = g.data() + static_cast<size_t>(gy * gw + gx) * D;
        int d = 0;
        for (int c = 0; c < channels; ++c)
          for (int py = 0; py < patch; ++py)
            for (int px = 0; px < patch; ++px)
              row[d++] += self.grad.at(c, gy * patch + py, gx * patch + px);
      }
  });
}

Var gather_rows(const Var& a, const std::vector<int>& idx) {
  const Tensor& av = a.val();
  if (av.rank() != 2) throw std::invalid_argument("gather_rows: rank-2 expected");
  const int D = av.dim(1);
  Tensor y({static_cast<int>(idx.size()), D});
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= av.dim(0)) throw std::out_of_range("gather_rows: bad index");
    std::copy(av.data() + static_cast<size_t>(idx[r]) * D,
              av.data() + static_cast<size_t>(idx[r] + 1) * D,
              y.data() + r * D);
  }
  return make_node(std::move(y), {a.node()}, [idx, D](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (size_t r = 0; r < idx.size(); ++r)
      for (int c = 0; c < D; ++c) g.at(idx[r], c) += self.grad.at(static_cast<int>(r), c);
  });
}

std::pair<Var, std::vector<int>> row_max(const Var& a) {
  const Tensor& av = a.val();
  if (av.rank() != 2) throw std::invalid_argument("row_max: rank-2 expected");
  const int N = av.dim(0), M = av.dim(1);
  Tensor s({N});
  std::vector<int> h(static_cast<size_t>(N), 0);
  for (int r = 0; r < N; ++r) {
    float best = av.at(r, 0);
    int arg = 0;
    for (int c = 1; c < M; ++c) {
      if (av.at(r, c) > best) {
        best = av.at(r, c);
        arg = c;
      }
    }
    s[r] = best;
    h[static_cast<size_t>(r)] = arg;
  }
  Var sv = make_node(std::move(s), {a.node()}, [h, M](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int64_t r = 0; r < self.grad.numel(); ++r) g.at(static_cast<int>(r), h[r]) += self.grad[r];
  });
  return {sv, h};
}

Var broadcast_patch_map(const Var& s, int grid_h, int grid_w, int patch) {
  const Tensor& sv = s.val();
  if (sv.numel() != static_cast<int64_t>(grid_h) * grid_w)
    throw std::invalid_argument("broadcast_patch_map: score count != grid");
  Tensor y({1, grid_h * patch, grid_w * patch});
  for (int yy = 0; yy < grid_h * patch; ++yy)
    for (int xx = 0; xx < grid_w * patch; ++xx)
      y.at(0, yy, xx) = sv[(yy / patch) * grid_w + xx / patch];
  return make_node(std::move(y), {s.node()}, [grid_h, grid_w, patch](Node& self) {
    Tensor& g = self.parents[0]->grad_buf();
    for (int yy = 0; yy < grid_h * patch; ++yy)
      for (int xx = 0; xx < grid_w * patch; ++xx)
        g[(yy / patch) * grid_w + xx / patch] += self.grad.at(0, yy, xx);
  });
}

// ----- parameters -----

Var& ParamStore::add(const std::string& name, Tensor init) {
  if (find(name)) throw std::logic_error("ParamStore: duplicate name " + name);
  items_.emplace_back(name, Var::leaf(std::move(init), true));
  return items_.back().second;
}

Var* ParamStore::find(const std::string& name) {
  for (auto& [n, v] : items_)
    if (n == name) return &v;
  return nullptr;
}

const Var* ParamStore::find(const std::string& name) const {
  for (const auto& [n, v] : items_)
    if (n == name) return &v;
  return nullptr;
}

void ParamStore::zero_grads() {
  for (auto& [n, v] : items_) {
    Tensor& g = v.grad();
    g.fill(0.0f);
  }
}

bool ParamStore::all_finite() const {
  for (const auto& [n, v] : items_)
    if (!v.val().all_finite()) return false;
  return true;
}

void Adam::step(ParamStore& params) {
  if (m_.empty()) {
    for (auto& [n, v] : params.items()) {
      m_.emplace_back(Tensor::zeros(v.val().shape()));
      v_.emplace_back(Tensor::zeros(v.val().shape()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.items().size(); ++i) {
    Var& p = params.items()[i].second;
    Tensor& theta = p.mut_val();
    const Tensor& g = p.grad();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t j = 0; j < theta.numel(); ++j) {
      const double gj = g[j];
      m[j] = static_cast<float>(beta1_ * m[j] + (1.0 - beta1_) * gj);
      v[j] = static_cast<float>(beta2_ * v[j] + (1.0 - beta2_) * gj * gj);
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      theta[j] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + eps_));
    }
  }
}

}  // namespace rdf::ag
