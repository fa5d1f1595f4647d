#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "awfnet/tensor.hpp"

namespace awfnet {

enum class Mode { train, eval };

namespace detail {

template <typename T>
inline void require_same_shape(const char* op, const Tensor<T>& a,
                               const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
inline void require_ndim(const char* op, const Tensor<T>& t, int nd) {
  if (t.ndim() != nd) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(nd) +
                     "-d tensor, got shape " + shape_str(t.shape()));
  }
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("add", a, b);
  std::vector<T> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return detail::make_op<T>(
      "add", a.shape(), std::move(out), {a, b},
      [an = a.node(), bn = b.node()](const detail::Node<T>& o) {
        detail::accumulate(an, o.grad);
        detail::accumulate(bn, o.grad);
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("mul", a, b);
  std::vector<T> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return detail::make_op<T>(
      "mul", a.shape(), std::move(out), {a, b},
      [an = a.node(), bn = b.node()](const detail::Node<T>& o) {
        if (an->requires_grad) {
          auto& g = an->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bn->data[i];
        }
        if (bn->requires_grad) {
          auto& g = bn->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * an->data[i];
        }
      });
}

/// Multiply by a compile-time-known constant.
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  std::vector<T> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * c;
  return detail::make_op<T>(
      "scale", x.shape(), std::move(out), {x},
      [xn = x.node(), c](const detail::Node<T>& o) {
        if (!xn->requires_grad) return;
        auto& g = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * c;
      });
}

/// Multiply every element by a learnable single-element tensor.
template <typename T>
Tensor<T> scale_by(const Tensor<T>& x, const Tensor<T>& gate) {
  if (gate.numel() != 1) {
    throw ShapeError("scale_by: gate must be a single-element tensor, got " +
                     shape_str(gate.shape()));
  }
  const T g0 = gate.data()[0];
  std::vector<T> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * g0;
  return detail::make_op<T>(
      "scale_by", x.shape(), std::move(out), {x, gate},
      [xn = x.node(), gn = gate.node(), g0](const detail::Node<T>& o) {
        if (xn->requires_grad) {
          auto& g = xn->ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * g0;
        }
        if (gn->requires_grad) {
          T acc = 0;
          for (std::size_t i = 0; i < o.grad.size(); ++i)
            acc += o.grad[i] * xn->data[i];
          gn->ensure_grad()[0] += acc;
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  return detail::make_op<T>(
      "relu", x.shape(), std::move(out), {x},
      [xn = x.node()](const detail::Node<T>& o) {
        if (!xn->requires_grad) return;
        auto& g = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xn->data[i] > T(0)) g[i] += o.grad[i];
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    out[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                       : std::exp(v) / (T(1) + std::exp(v));
  }
  auto saved = out;
  return detail::make_op<T>(
      "sigmoid", x.shape(), std::move(out), {x},
      [xn = x.node(), s = std::move(saved)](const detail::Node<T>& o) {
        if (!xn->requires_grad) return;
        auto& g = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += o.grad[i] * s[i] * (T(1) - s[i]);
      });
}

/// Channel-wise concatenation of two BCHW stacks, order preserved.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_ndim("concat_channels", a, 4);
  detail::require_ndim("concat_channels", b, 4);
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: incompatible shapes " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
  const std::int64_t hw = std::int64_t(H) * W;
  std::vector<T> out(std::size_t(B) * (Ca + Cb) * hw);
  for (int n = 0; n < B; ++n) {
    std::copy_n(a.data().begin() + n * Ca * hw, Ca * hw,
                out.begin() + std::int64_t(n) * (Ca + Cb) * hw);
    std::copy_n(b.data().begin() + n * Cb * hw, Cb * hw,
                out.begin() + std::int64_t(n) * (Ca + Cb) * hw + Ca * hw);
  }
  return detail::make_op<T>(
      "concat_channels", {B, Ca + Cb, H, W}, std::move(out), {a, b},
      [an = a.node(), bn = b.node(), B, Ca, Cb, hw](const detail::Node<T>& o) {
        if (an->requires_grad) {
          auto& g = an->ensure_grad();
          for (int n = 0; n < B; ++n)
            for (std::int64_t i = 0; i < Ca * hw; ++i)
              g[n * Ca * hw + i] += o.grad[std::int64_t(n) * (Ca + Cb) * hw + i];
        }
        if (bn->requires_grad) {
          auto& g = bn->ensure_grad();
          for (int n = 0; n < B; ++n)
            for (std::int64_t i = 0; i < Cb * hw; ++i)
              g[n * Cb * hw + i] +=
                  o.grad[std::int64_t(n) * (Ca + Cb) * hw + Ca * hw + i];
        }
      });
}

/// [B,C,H,W] -> [B,C] spatial mean.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  detail::require_ndim("global_avg_pool", x, 4);
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t hw = std::int64_t(H) * W;
  std::vector<T> out(std::size_t(B) * C);
  for (int n = 0; n < B; ++n)
    for (int c = 0; c < C; ++c) {
      T acc = 0;
      const T* p = x.data().data() + (std::int64_t(n) * C + c) * hw;
      for (std::int64_t i = 0; i < hw; ++i) acc += p[i];
      out[std::size_t(n) * C + c] = acc / T(hw);
    }
  return detail::make_op<T>(
      "global_avg_pool", {B, C}, std::move(out), {x},
      [xn = x.node(), B, C, hw](const detail::Node<T>& o) {
        if (!xn->requires_grad) return;
        auto& g = xn->ensure_grad();
        for (int n = 0; n < B; ++n)
          for (int c = 0; c < C; ++c) {
            const T gv = o.grad[std::size_t(n) * C + c] / T(hw);
            T* p = g.data() + (std::int64_t(n) * C + c) * hw;
            for (std::int64_t i = 0; i < hw; ++i) p[i] += gv;
          }
      });
}

/// x[N,F] * w[O,F]^T + b[O] -> [N,O].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b = {}) {
  detail::require_ndim("linear", x, 2);
  detail::require_ndim("linear", w, 2);
  if (x.dim(1) != w.dim(1)) {
    throw ShapeError("linear: input features " + shape_str(x.shape()) +
                     " do not match weight " + shape_str(w.shape()));
  }
  const int N = x.dim(0), F = x.dim(1), O = w.dim(0);
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != O)) {
    throw ShapeError("linear: bias shape " + shape_str(b.shape()) +
                     " does not match weight " + shape_str(w.shape()));
  }
  std::vector<T> out(std::size_t(N) * O, T(0));
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o) {
      T acc = b.defined() ? b.data()[o] : T(0);
      for (int f = 0; f < F; ++f)
        acc += x.data()[std::size_t(n) * F + f] * w.data()[std::size_t(o) * F + f];
      out[std::size_t(n) * O + o] = acc;
    }
  std::vector<Tensor<T>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  return detail::make_op<T>(
      "linear", {N, O}, std::move(out), std::move(parents),
      [xn = x.node(), wn = w.node(), bnode = b.defined() ? b.node() : nullptr, N,
       F, O](const detail::Node<T>& o) {
        if (xn->requires_grad) {
          auto& g = xn->ensure_grad();
          for (int n = 0; n < N; ++n)
            for (int f = 0; f < F; ++f) {
              T acc = 0;
              for (int k = 0; k < O; ++k)
                acc += o.grad[std::size_t(n) * O + k] * wn->data[std::size_t(k) * F + f];
              g[std::size_t(n) * F + f] += acc;
            }
        }
        if (wn->requires_grad) {
          auto& g = wn->ensure_grad();
          for (int k = 0; k < O; ++k)
            for (int f = 0; f < F; ++f) {
              T acc = 0;
              for (int n = 0; n < N; ++n)
                acc += o.grad[std::size_t(n) * O + k] * xn->data[std::size_t(n) * F + f];
              g[std::size_t(k) * F + f] += acc;
            }
        }
        if (bnode && bnode->requires_grad) {
          auto& g = bnode->ensure_grad();
          for (int n = 0; n < N; ++n)
            for (int k = 0; k < O; ++k) g[k] += o.grad[std::size_t(n) * O + k];
        }
      });
}

/// Row-wise stable softmax over the last axis of a 2-d tensor.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  detail::require_ndim("softmax", x, 2);
  const int N = x.dim(0), C = x.dim(1);
  std::vector<T> out(std::size_t(N) * C);
  for (int n = 0; n < N; ++n) {
    const T* row = x.data().data() + std::size_t(n) * C;
    T m = row[0];
    for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
    T denom = 0;
    for (int c = 0; c < C; ++c) {
      out[std::size_t(n) * C + c] = std::exp(row[c] - m);
      denom += out[std::size_t(n) * C + c];
    }
    for (int c = 0; c < C; ++c) out[std::size_t(n) * C + c] /= denom;
  }
  auto saved = out;
  return detail::make_op<T>(
      "softmax", x.shape(), std::move(out), {x},
      [xn = x.node(), p = std::move(saved), N, C](const detail::Node<T>& o) {
        if (!xn->requires_grad) return;
        auto& g = xn->ensure_grad();
        for (int n = 0; n < N; ++n) {
          T dot = 0;
          for (int c = 0; c < C; ++c)
            dot += o.grad[std::size_t(n) * C + c] * p[std::size_t(n) * C + c];
          for (int c = 0; c < C; ++c)
            g[std::size_t(n) * C + c] +=
                p[std::size_t(n) * C + c] * (o.grad[std::size_t(n) * C + c] - dot);
        }
      });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return detail::make_op<T>(
      "sum", {1}, {acc}, {x}, [xn = x.node()](const detail::Node<T>& o) {
        if (!xn->requires_grad) return;
        auto& g = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[0];
      });
}

/// Metadata-only reshape (row-major layout preserved; data copied).
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<T> out = x.data();
  return detail::make_op<T>(
      "reshape", std::move(shape), std::move(out), {x},
      [xn = x.node()](const detail::Node<T>& o) { detail::accumulate(xn, o.grad); });
}

/// Direct 2-d convolution (cross-correlation), NCHW.
/// out[b,co,oy,ox] = bias[co] + sum_{ci,ky,kx} x[b,ci,oy*s-p+ky,ox*s-p+kx] * w[co,ci,ky,kx]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias = {},
                 int stride = 1, int padding = 0) {
  detail::require_ndim("conv2d", x, 4);
  detail::require_ndim("conv2d", w, 4);
  const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != Cin) {
    throw ShapeError("conv2d: weight " + shape_str(w.shape()) +
                     " does not match input channels of " + shape_str(x.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (padding < 0) throw ShapeError("conv2d: padding must be >= 0");
  if (H + 2 * padding < kh || W + 2 * padding < kw) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) +
                     " exceeds padded input extent of " + shape_str(x.shape()));
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != Cout)) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) +
                     " does not match out channels " + std::to_string(Cout));
  }
  const int Ho = (H + 2 * padding - kh) / stride + 1;
  const int Wo = (W + 2 * padding - kw) / stride + 1;

  std::vector<T> out(std::size_t(B) * Cout * Ho * Wo);
  const T* xd = x.data().data();
  const T* wd = w.data().data();
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < Cout; ++co) {
      const T b0 = bias.defined() ? bias.data()[co] : T(0);
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T acc = b0;
          for (int ci = 0; ci < Cin; ++ci) {
            const T* xp = xd + ((std::int64_t(b) * Cin + ci) * H) * W;
            const T* wp = wd + ((std::int64_t(co) * Cin + ci) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride - padding + kx;
                if (ix < 0 || ix >= W) continue;
                acc += xp[std::int64_t(iy) * W + ix] * wp[std::int64_t(ky) * kw + kx];
              }
            }
          }
          out[((std::int64_t(b) * Cout + co) * Ho + oy) * Wo + ox] = acc;
        }
    }

  std::vector<Tensor<T>> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return detail::make_op<T>(
      "conv2d", {B, Cout, Ho, Wo}, std::move(out), std::move(parents),
      [xn = x.node(), wn = w.node(),
       bn = bias.defined() ? bias.node() : nullptr, B, Cin, H, W, Cout, kh, kw,
       Ho, Wo, stride, padding](const detail::Node<T>& o) {
        const T* gy = o.grad.data();
        if (xn->requires_grad) {
          auto& gx = xn->ensure_grad();
          for (int b = 0; b < B; ++b)
            for (int co = 0; co < Cout; ++co)
              for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                  const T gv = gy[((std::int64_t(b) * Cout + co) * Ho + oy) * Wo + ox];
                  for (int ci = 0; ci < Cin; ++ci)
                    for (int ky = 0; ky < kh; ++ky) {
                      const int iy = oy * stride - padding + ky;
                      if (iy < 0 || iy >= H) continue;
                      for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - padding + kx;
                        if (ix < 0 || ix >= W) continue;
                        gx[((std::int64_t(b) * Cin + ci) * H + iy) * W + ix] +=
                            gv * wn->data[((std::int64_t(co) * Cin + ci) * kh + ky) * kw + kx];
                      }
                    }
                }
        }
        if (wn->requires_grad) {
          auto& gw = wn->ensure_grad();
          for (int b = 0; b < B; ++b)
            for (int co = 0; co < Cout; ++co)
              for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                  const T gv = gy[((std::int64_t(b) * Cout + co) * Ho + oy) * Wo + ox];
                  for (int ci = 0; ci < Cin; ++ci)
                    for (int ky = 0; ky < kh; ++ky) {
                      const int iy = oy * stride - padding + ky;
                      if (iy < 0 || iy >= H) continue;
                      for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - padding + kx;
                        if (ix < 0 || ix >= W) continue;
                        gw[((std::int64_t(co) * Cin + ci) * kh + ky) * kw + kx] +=
                            gv * xn->data[((std::int64_t(b) * Cin + ci) * H + iy) * W + ix];
                      }
                    }
                }
        }
        if (bn && bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (int b = 0; b < B; ++b)
            for (int co = 0; co < Cout; ++co) {
              T acc = 0;
              const T* p = gy + (std::int64_t(b) * Cout + co) * Ho * Wo;
              for (std::int64_t i = 0; i < std::int64_t(Ho) * Wo; ++i) acc += p[i];
              gb[co] += acc;
            }
        }
      });
}

/// Per-channel 3x3 (or kxk) spatial convolution, weight [C,1,k,k].
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& bias = {}, int padding = 1) {
  detail::require_ndim("depthwise_conv2d", x, 4);
  detail::require_ndim("depthwise_conv2d", w, 4);
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int kh = w.dim(2), kw = w.dim(3);
  if (w.dim(0) != C || w.dim(1) != 1) {
    throw ShapeError("depthwise_conv2d: weight " + shape_str(w.shape()) +
                     " does not match input channels of " + shape_str(x.shape()));
  }
  if (H + 2 * padding < kh || W + 2 * padding < kw) {
    throw ShapeError("depthwise_conv2d: kernel exceeds padded input extent");
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != C)) {
    throw ShapeError("depthwise_conv2d: bias shape " + shape_str(bias.shape()) +
                     " does not match channels " + std::to_string(C));
  }
  const int Ho = H + 2 * padding - kh + 1;
  const int Wo = W + 2 * padding - kw + 1;

  std::vector<T> out(std::size_t(B) * C * Ho * Wo);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* xp = x.data().data() + (std::int64_t(b) * C + c) * H * W;
      const T* wp = w.data().data() + std::int64_t(c) * kh * kw;
      const T b0 = bias.defined() ? bias.data()[c] : T(0);
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T acc = b0;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy - padding + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox - padding + kx;
              if (ix < 0 || ix >= W) continue;
              acc += xp[std::int64_t(iy) * W + ix] * wp[std::int64_t(ky) * kw + kx];
            }
          }
          out[((std::int64_t(b) * C + c) * Ho + oy) * Wo + ox] = acc;
        }
    }

  std::vector<Tensor<T>> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return detail::make_op<T>(
      "depthwise_conv2d", {B, C, Ho, Wo}, std::move(out), std::move(parents),
      [xn = x.node(), wn = w.node(),
       bn = bias.defined() ? bias.node() : nullptr, B, C, H, W, kh, kw, Ho, Wo,
       padding](const detail::Node<T>& o) {
        for (int b = 0; b < B; ++b)
          for (int c = 0; c < C; ++c) {
            const T* gy = o.grad.data() + (std::int64_t(b) * C + c) * Ho * Wo;
            const T* xp = xn->data.data() + (std::int64_t(b) * C + c) * H * W;
            const T* wp = wn->data.data() + std::int64_t(c) * kh * kw;
            for (int oy = 0; oy < Ho; ++oy)
              for (int ox = 0; ox < Wo; ++ox) {
                const T gv = gy[std::int64_t(oy) * Wo + ox];
                for (int ky = 0; ky < kh; ++ky) {
                  const int iy = oy - padding + ky;
                  if (iy < 0 || iy >= H) continue;
                  for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox - padding + kx;
                    if (ix < 0 || ix >= W) continue;
                    if (xn->requires_grad)
                      xn->ensure_grad()[(std::int64_t(b) * C + c) * H * W +
                                        std::int64_t(iy) * W + ix] +=
                          gv * wp[std::int64_t(ky) * kw + kx];
                    if (wn->requires_grad)
                      wn->ensure_grad()[std::int64_t(c) * kh * kw +
                                        std::int64_t(ky) * kw + kx] +=
                          gv * xp[std::int64_t(iy) * W + ix];
                  }
                }
                if (bn && bn->requires_grad) bn->ensure_grad()[c] += gv;
              }
          }
      });
}

/// Batch normalization over (B,H,W) per channel. Train mode normalizes by
/// batch statistics and updates the running estimates in place (momentum
/// convention: running = (1-m)*running + m*batch, unbiased variance for the
/// running estimate, biased for normalization).
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, std::vector<T>& running_mean,
                     std::vector<T>& running_var, Mode mode,
                     T momentum = T(0.1), T eps = T(1e-5)) {
  detail::require_ndim("batch_norm", x, 4);
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (gamma.numel() != C || beta.numel() != C ||
      static_cast<int>(running_mean.size()) != C ||
      static_cast<int>(running_var.size()) != C) {
    throw ShapeError("batch_norm: affine/stat size does not match channels " +
                     std::to_string(C));
  }
  const std::int64_t n = std::int64_t(B) * H * W;
  if (mode == Mode::train && n < 2) {
    throw ContractError("batch_norm: train mode needs B*H*W >= 2 elements per "
                        "channel, got " + std::to_string(n));
  }

  std::vector<T> mean(C), invstd(C);
  if (mode == Mode::train) {
    for (int c = 0; c < C; ++c) {
      T m = 0;
      for (int b = 0; b < B; ++b) {
        const T* p = x.data().data() + (std::int64_t(b) * C + c) * H * W;
        for (std::int64_t i = 0; i < std::int64_t(H) * W; ++i) m += p[i];
      }
      m /= T(n);
      T v = 0;
      for (int b = 0; b < B; ++b) {
        const T* p = x.data().data() + (std::int64_t(b) * C + c) * H * W;
        for (std::int64_t i = 0; i < std::int64_t(H) * W; ++i) {
          const T d = p[i] - m;
          v += d * d;
        }
      }
      v /= T(n);
      mean[c] = m;
      invstd[c] = T(1) / std::sqrt(v + eps);
      running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * m;
      running_var[c] = (T(1) - momentum) * running_var[c] +
                       momentum * v * T(n) / T(n - 1);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      invstd[c] = T(1) / std::sqrt(running_var[c] + eps);
    }
  }

  std::vector<T> xhat(x.data().size());
  std::vector<T> out(x.data().size());
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const std::int64_t base = (std::int64_t(b) * C + c) * H * W;
      for (std::int64_t i = 0; i < std::int64_t(H) * W; ++i) {
        const T xh = (x.data()[base + i] - mean[c]) * invstd[c];
        xhat[base + i] = xh;
        out[base + i] = gamma.data()[c] * xh + beta.data()[c];
      }
    }

  const bool train = mode == Mode::train;
  return detail::make_op<T>(
      "batch_norm", x.shape(), std::move(out), {x, gamma, beta},
      [xn = x.node(), gn = gamma.node(), bn = beta.node(),
       xh = std::move(xhat), is = std::move(invstd), B, C, H, W, n,
       train](const detail::Node<T>& o) {
        const std::int64_t hw = std::int64_t(H) * W;
        for (int c = 0; c < C; ++c) {
          // channel-wise reductions of dy and dy*xhat
          T sum_dy = 0, sum_dyxh = 0;
          for (int b = 0; b < B; ++b) {
            const std::int64_t base = (std::int64_t(b) * C + c) * hw;
            for (std::int64_t i = 0; i < hw; ++i) {
              sum_dy += o.grad[base + i];
              sum_dyxh += o.grad[base + i] * xh[base + i];
            }
          }
          if (gn->requires_grad) gn->ensure_grad()[c] += sum_dyxh;
          if (bn->requires_grad) bn->ensure_grad()[c] += sum_dy;
          if (xn->requires_grad) {
            auto& gx = xn->ensure_grad();
            const T g = gn->data[c];
            if (train) {
              const T mean_dy = sum_dy / T(n);
              const T mean_dyxh = sum_dyxh / T(n);
              for (int b = 0; b < B; ++b) {
                const std::int64_t base = (std::int64_t(b) * C + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i)
                  gx[base + i] += g * is[c] *
                                  (o.grad[base + i] - mean_dy -
                                   xh[base + i] * mean_dyxh);
              }
            } else {
              for (int b = 0; b < B; ++b) {
                const std::int64_t base = (std::int64_t(b) * C + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i)
                  gx[base + i] += g * is[c] * o.grad[base + i];
              }
            }
          }
        }
      });
}

/// Group normalization: per (sample, group) statistics over (C/G)*H*W
/// elements, per-channel affine.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, int num_groups, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
  detail::require_ndim("group_norm", x, 4);
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (num_groups < 1 || C % num_groups != 0) {
    throw ConfigError("group_norm: channels " + std::to_string(C) +
                      " not divisible by num_groups " + std::to_string(num_groups));
  }
  if (gamma.numel() != C || beta.numel() != C) {
    throw ShapeError("group_norm: affine size does not match channels " +
                     std::to_string(C));
  }
  const int gs = C / num_groups;
  const std::int64_t hw = std::int64_t(H) * W;
  const std::int64_t n = std::int64_t(gs) * hw;

  std::vector<T> xhat(x.data().size());
  std::vector<T> out(x.data().size());
  std::vector<T> invstd(std::size_t(B) * num_groups);
  for (int b = 0; b < B; ++b)
    for (int g = 0; g < num_groups; ++g) {
      const std::int64_t base = (std::int64_t(b) * C + std::int64_t(g) * gs) * hw;
      T m = 0;
      for (std::int64_t i = 0; i < n; ++i) m += x.data()[base + i];
      m /= T(n);
      T v = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        const T d = x.data()[base + i] - m;
        v += d * d;
      }
      v /= T(n);
      const T is = T(1) / std::sqrt(v + eps);
      invstd[std::size_t(b) * num_groups + g] = is;
      for (int s = 0; s < gs; ++s) {
        const int c = g * gs + s;
        for (std::int64_t i = 0; i < hw; ++i) {
          const std::int64_t k = base + std::int64_t(s) * hw + i;
          xhat[k] = (x.data()[k] - m) * is;
          out[k] = gamma.data()[c] * xhat[k] + beta.data()[c];
        }
      }
    }

  return detail::make_op<T>(
      "group_norm", x.shape(), std::move(out), {x, gamma, beta},
      [xn = x.node(), gn = gamma.node(), bn = beta.node(), xh = std::move(xhat),
       is = std::move(invstd), B, C, H, W, num_groups, gs,
       n](const detail::Node<T>& o) {
        const std::int64_t hw = std::int64_t(H) * W;
        if (gn->requires_grad || bn->requires_grad) {
          for (int c = 0; c < C; ++c) {
            T sdy = 0, sdyxh = 0;
            for (int b = 0; b < B; ++b) {
              const std::int64_t base = (std::int64_t(b) * C + c) * hw;
              for (std::int64_t i = 0; i < hw; ++i) {
                sdy += o.grad[base + i];
                sdyxh += o.grad[base + i] * xh[base + i];
              }
            }
            if (gn->requires_grad) gn->ensure_grad()[c] += sdyxh;
            if (bn->requires_grad) bn->ensure_grad()[c] += sdy;
          }
        }
        if (xn->requires_grad) {
          auto& gx = xn->ensure_grad();
          for (int b = 0; b < B; ++b)
            for (int g = 0; g < num_groups; ++g) {
              const std::int64_t base =
                  (std::int64_t(b) * C + std::int64_t(g) * gs) * hw;
              // dxhat = dy * gamma, then the per-group normalization backward
              T mean_dxh = 0, mean_dxhxh = 0;
              for (int s = 0; s < gs; ++s) {
                const int c = g * gs + s;
                for (std::int64_t i = 0; i < hw; ++i) {
                  const std::int64_t k = base + std::int64_t(s) * hw + i;
                  const T dxh = o.grad[k] * gn->data[c];
                  mean_dxh += dxh;
                  mean_dxhxh += dxh * xh[k];
                }
              }
              mean_dxh /= T(n);
              mean_dxhxh /= T(n);
              const T isv = is[std::size_t(b) * num_groups + g];
              for (int s = 0; s < gs; ++s) {
                const int c = g * gs + s;
                for (std::int64_t i = 0; i < hw; ++i) {
                  const std::int64_t k = base + std::int64_t(s) * hw + i;
                  const T dxh = o.grad[k] * gn->data[c];
                  gx[k] += isv * (dxh - mean_dxh - xh[k] * mean_dxhxh);
                }
              }
            }
        }
      });
}

/// Grouped channel-fiber linear map: out[b,g,:,y,x] = w[g] * in[b,g,:,y,x] + bias[g].
template <typename T>
Tensor<T> grouped_linear(const Tensor<T>& x, const Tensor<T>& w,
                         const Tensor<T>& b) {
  detail::require_ndim("grouped_linear", x, 5);
  detail::require_ndim("grouped_linear", w, 3);
  detail::require_ndim("grouped_linear", b, 2);
  const int B = x.dim(0), G = x.dim(1), S = x.dim(2), h = x.dim(3), ww = x.dim(4);
  if (w.dim(0) != G || w.dim(1) != S || w.dim(2) != S || b.dim(0) != G ||
      b.dim(1) != S) {
    throw ShapeError("grouped_linear: weight " + shape_str(w.shape()) +
                     " / bias " + shape_str(b.shape()) +
                     " do not match input " + shape_str(x.shape()));
  }
  const std::int64_t hw = std::int64_t(h) * ww;
  std::vector<T> out(x.data().size());
  for (int n = 0; n < B; ++n)
    for (int g = 0; g < G; ++g) {
      const T* wp = w.data().data() + std::int64_t(g) * S * S;
      const T* bp = b.data().data() + std::int64_t(g) * S;
      const std::int64_t base = (std::int64_t(n) * G + g) * S * hw;
      for (std::int64_t i = 0; i < hw; ++i)
        for (int o = 0; o < S; ++o) {
          T acc = bp[o];
          for (int s = 0; s < S; ++s)
            acc += wp[std::int64_t(o) * S + s] * x.data()[base + std::int64_t(s) * hw + i];
          out[base + std::int64_t(o) * hw + i] = acc;
        }
    }
  return detail::make_op<T>(
      "grouped_linear", x.shape(), std::move(out), {x, w, b},
      [xn = x.node(), wn = w.node(), bn = b.node(), B, G, S, hw](const detail::Node<T>& o) {
        for (int n = 0; n < B; ++n)
          for (int g = 0; g < G; ++g) {
            const T* wp = wn->data.data() + std::int64_t(g) * S * S;
            const std::int64_t base = (std::int64_t(n) * G + g) * S * hw;
            for (std::int64_t i = 0; i < hw; ++i)
              for (int k = 0; k < S; ++k) {
                const T gv = o.grad[base + std::int64_t(k) * hw + i];
                if (xn->requires_grad) {
                  auto& gx = xn->ensure_grad();
                  for (int s = 0; s < S; ++s)
                    gx[base + std::int64_t(s) * hw + i] += gv * wp[std::int64_t(k) * S + s];
                }
                if (wn->requires_grad) {
                  auto& gw = wn->ensure_grad();
                  for (int s = 0; s < S; ++s)
                    gw[std::int64_t(g) * S * S + std::int64_t(k) * S + s] +=
                        gv * xn->data[base + std::int64_t(s) * hw + i];
                }
                if (bn->requires_grad)
                  bn->ensure_grad()[std::int64_t(g) * S + k] += gv;
              }
          }
      });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}

}  // namespace awfnet
