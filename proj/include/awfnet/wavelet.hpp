#pragma once

#include <array>
#include <cmath>

#include "awfnet/ops.hpp"

namespace awfnet {

/// The four Haar subbands of a BCHW stack, each [B,C,H/2,W/2].
/// ll = low/low approximation, lh = low-horizontal/high-vertical detail,
/// hl = high-horizontal/low-vertical, hh = diagonal.
template <typename T>
struct SubbandSet {
  Tensor<T> ll, lh, hl, hh;

  std::array<const Tensor<T>*, 4> bands() const { return {&ll, &lh, &hl, &hh}; }
};

/// Orthonormal Haar basis: low = (1,1)/sqrt(2), high = (1,-1)/sqrt(2).
template <typename T>
struct HaarBasis {
  static constexpr T low0() { return T(1) / T(M_SQRT2); }
  static constexpr T low1() { return T(1) / T(M_SQRT2); }
  static constexpr T high0() { return T(1) / T(M_SQRT2); }
  static constexpr T high1() { return T(-1) / T(M_SQRT2); }
};

namespace detail {

// Analysis of one 2x2 block [[a,b],[c,d]] with the orthonormal Haar pair.
// ll = (a+b+c+d)/2, lh = (a+b-c-d)/2, hl = (a-b+c-d)/2, hh = (a-b-c+d)/2.
template <typename T>
inline void haar_analysis(T a, T b, T c, T d, T& ll, T& lh, T& hl, T& hh) {
  const T half = T(0.5);
  ll = (a + b + c + d) * half;
  lh = (a + b - c - d) * half;
  hl = (a - b + c - d) * half;
  hh = (a - b - c + d) * half;
}

// Exact inverse of haar_analysis (the transform is orthogonal).
template <typename T>
inline void haar_synthesis(T ll, T lh, T hl, T hh, T& a, T& b, T& c, T& d) {
  const T half = T(0.5);
  a = (ll + lh + hl + hh) * half;
  b = (ll + lh - hl - hh) * half;
  c = (ll - lh + hl - hh) * half;
  d = (ll - lh - hl + hh) * half;
}

template <typename T>
void dwt2_raw(const std::vector<T>& x, int B, int C, int H, int W,
              std::vector<T>& ll, std::vector<T>& lh, std::vector<T>& hl,
              std::vector<T>& hh) {
  const int h = H / 2, w = W / 2;
  const std::size_t n = std::size_t(B) * C * h * w;
  ll.resize(n);
  lh.resize(n);
  hl.resize(n);
  hh.resize(n);
  for (int bc = 0; bc < B * C; ++bc) {
    const T* xp = x.data() + std::int64_t(bc) * H * W;
    const std::int64_t ob = std::int64_t(bc) * h * w;
    for (int y = 0; y < h; ++y)
      for (int xw = 0; xw < w; ++xw) {
        const T a = xp[std::int64_t(2 * y) * W + 2 * xw];
        const T b = xp[std::int64_t(2 * y) * W + 2 * xw + 1];
        const T c = xp[std::int64_t(2 * y + 1) * W + 2 * xw];
        const T d = xp[std::int64_t(2 * y + 1) * W + 2 * xw + 1];
        haar_analysis(a, b, c, d, ll[ob + std::int64_t(y) * w + xw],
                      lh[ob + std::int64_t(y) * w + xw],
                      hl[ob + std::int64_t(y) * w + xw],
                      hh[ob + std::int64_t(y) * w + xw]);
      }
  }
}

template <typename T>
void idwt2_raw(const std::vector<T>& ll, const std::vector<T>& lh,
               const std::vector<T>& hl, const std::vector<T>& hh, int B, int C,
               int h, int w, std::vector<T>& x) {
  const int H = 2 * h, W = 2 * w;
  x.resize(std::size_t(B) * C * H * W);
  for (int bc = 0; bc < B * C; ++bc) {
    T* xp = x.data() + std::int64_t(bc) * H * W;
    const std::int64_t ib = std::int64_t(bc) * h * w;
    for (int y = 0; y < h; ++y)
      for (int xw = 0; xw < w; ++xw) {
        const std::int64_t k = ib + std::int64_t(y) * w + xw;
        haar_synthesis(ll[k], lh[k], hl[k], hh[k],
                       xp[std::int64_t(2 * y) * W + 2 * xw],
                       xp[std::int64_t(2 * y) * W + 2 * xw + 1],
                       xp[std::int64_t(2 * y + 1) * W + 2 * xw],
                       xp[std::int64_t(2 * y + 1) * W + 2 * xw + 1]);
      }
  }
}

}  // namespace detail

/// Single-level orthonormal Haar analysis over the spatial axes. H and W
/// must be even; callers pad beforehand if needed.
template <typename T>
SubbandSet<T> dwt2(const Tensor<T>& x) {
  detail::require_ndim("dwt2", x, 4);
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0 || H < 2 || W < 2) {
    throw ShapeError("dwt2: spatial dims of " + shape_str(x.shape()) +
                     " must be even and >= 2; pad before transforming");
  }
  const int h = H / 2, w = W / 2;
  std::vector<T> ll, lh, hl, hh;
  detail::dwt2_raw(x.data(), B, C, H, W, ll, lh, hl, hh);

  // The transform is linear with an orthogonal matrix, so the adjoint of the
  // analysis is the synthesis applied to the subband gradients.
  auto make_band = [&](const char* name, std::vector<T> data, int band) {
    return detail::make_op<T>(
        name, {B, C, h, w}, std::move(data), {x},
        [xn = x.node(), B, C, h, w, band](const detail::Node<T>& o) {
          if (!xn->requires_grad) return;
          auto& gx = xn->ensure_grad();
          const int H = 2 * h, W = 2 * w;
          for (int bc = 0; bc < B * C; ++bc) {
            T* gp = gx.data() + std::int64_t(bc) * H * W;
            const std::int64_t ib = std::int64_t(bc) * h * w;
            for (int y = 0; y < h; ++y)
              for (int xw = 0; xw < w; ++xw) {
                const T g = o.grad[ib + std::int64_t(y) * w + xw];
                T a, b, c, d;
                T bands[4] = {0, 0, 0, 0};
                bands[band] = g;
                detail::haar_synthesis(bands[0], bands[1], bands[2], bands[3],
                                       a, b, c, d);
                gp[std::int64_t(2 * y) * W + 2 * xw] += a;
                gp[std::int64_t(2 * y) * W + 2 * xw + 1] += b;
                gp[std::int64_t(2 * y + 1) * W + 2 * xw] += c;
                gp[std::int64_t(2 * y + 1) * W + 2 * xw + 1] += d;
              }
          }
        });
  };
  SubbandSet<T> s;
  s.ll = make_band("dwt2.ll", std::move(ll), 0);
  s.lh = make_band("dwt2.lh", std::move(lh), 1);
  s.hl = make_band("dwt2.hl", std::move(hl), 2);
  s.hh = make_band("dwt2.hh", std::move(hh), 3);
  return s;
}

/// Exact inverse of dwt2 (transposed-filter upsampling summed over the four
/// subbands).
template <typename T>
Tensor<T> idwt2(const SubbandSet<T>& s) {
  for (const Tensor<T>* b : s.bands()) {
    detail::require_ndim("idwt2", *b, 4);
    if (b->shape() != s.ll.shape()) {
      throw ShapeError("idwt2: subband shapes differ: " + shape_str(s.ll.shape()) +
                       " vs " + shape_str(b->shape()));
    }
  }
  const int B = s.ll.dim(0), C = s.ll.dim(1), h = s.ll.dim(2), w = s.ll.dim(3);
  std::vector<T> out;
  detail::idwt2_raw(s.ll.data(), s.lh.data(), s.hl.data(), s.hh.data(), B, C, h,
                    w, out);
  return detail::make_op<T>(
      "idwt2", {B, C, 2 * h, 2 * w}, std::move(out),
      {s.ll, s.lh, s.hl, s.hh},
      [lln = s.ll.node(), lhn = s.lh.node(), hln = s.hl.node(),
       hhn = s.hh.node(), B, C, h, w](const detail::Node<T>& o) {
        // Adjoint of synthesis is analysis of the output gradient.
        std::vector<T> gll, glh, ghl, ghh;
        detail::dwt2_raw(o.grad, B, C, 2 * h, 2 * w, gll, glh, ghl, ghh);
        detail::accumulate(lln, gll);
        detail::accumulate(lhn, glh);
        detail::accumulate(hln, ghl);
        detail::accumulate(hhn, ghh);
      });
}

}  // namespace awfnet
