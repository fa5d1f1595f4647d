#pragma once

// Test-side reference implementations. These are written independently of
// the library code paths (plain scalar loops, no graph) and act as the
// oracles the production ops are checked against.

#include <cmath>
#include <random>
#include <vector>

#include "awfnet/tensor.hpp"

namespace oracle {

using awfnet::Shape;

template <typename T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return v;
}

template <typename T>
awfnet::Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng,
                                bool requires_grad = false, double lo = -1.0,
                                double hi = 1.0) {
  auto v = random_vec<T>(static_cast<std::size_t>(awfnet::numel_of(shape)), rng,
                         lo, hi);
  return awfnet::Tensor<T>::from_data(std::move(shape), std::move(v),
                                      requires_grad);
}

// Direct quadruple-loop convolution over zero-padded input.
inline std::vector<double> conv2d_ref(const std::vector<double>& x, int B,
                                      int Cin, int H, int W,
                                      const std::vector<double>& w, int Cout,
                                      int k, const std::vector<double>& bias,
                                      int stride, int pad) {
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  std::vector<double> out(std::size_t(B) * Cout * Ho * Wo, 0.0);
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < Cout; ++co)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (int ci = 0; ci < Cin; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x[((std::size_t(b) * Cin + ci) * H + iy) * W + ix] *
                       w[((std::size_t(co) * Cin + ci) * k + ky) * k + kx];
              }
          out[((std::size_t(b) * Cout + co) * Ho + oy) * Wo + ox] = acc;
        }
  return out;
}

// Grouped convolution with groups == channels: the depthwise reference.
inline std::vector<double> depthwise_ref(const std::vector<double>& x, int B,
                                         int C, int H, int W,
                                         const std::vector<double>& w, int k,
                                         const std::vector<double>& bias,
                                         int pad) {
  std::vector<double> out;
  for (int c = 0; c < C; ++c) {
    // run a single-channel conv per channel and stitch the results
    for (int b = 0; b < B; ++b) {
      std::vector<double> xc(std::size_t(H) * W);
      for (int i = 0; i < H * W; ++i)
        xc[i] = x[(std::size_t(b) * C + c) * H * W + i];
      std::vector<double> wc(w.begin() + std::size_t(c) * k * k,
                             w.begin() + std::size_t(c + 1) * k * k);
      std::vector<double> bc = bias.empty() ? std::vector<double>{}
                                            : std::vector<double>{bias[c]};
      auto oc = conv2d_ref(xc, 1, 1, H, W, wc, 1, k, bc, 1, pad);
      if (out.empty()) out.assign(std::size_t(B) * C * oc.size(), 0.0);
      for (std::size_t i = 0; i < oc.size(); ++i)
        out[(std::size_t(b) * C + c) * oc.size() + i] = oc[i];
    }
  }
  return out;
}

// Straight-line batch-norm formula (train mode, biased variance).
inline std::vector<double> batch_norm_ref(const std::vector<double>& x, int B,
                                          int C, int H, int W,
                                          const std::vector<double>& gamma,
                                          const std::vector<double>& beta,
                                          double eps) {
  std::vector<double> out(x.size());
  const double n = double(B) * H * W;
  for (int c = 0; c < C; ++c) {
    double mean = 0;
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < H * W; ++i)
        mean += x[(std::size_t(b) * C + c) * H * W + i];
    mean /= n;
    double var = 0;
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < H * W; ++i) {
        const double d = x[(std::size_t(b) * C + c) * H * W + i] - mean;
        var += d * d;
      }
    var /= n;
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < H * W; ++i) {
        const std::size_t idx = (std::size_t(b) * C + c) * H * W + i;
        out[idx] = gamma[c] * (x[idx] - mean) / std::sqrt(var + eps) + beta[c];
      }
  }
  return out;
}

// Straight-line group-norm formula.
inline std::vector<double> group_norm_ref(const std::vector<double>& x, int B,
                                          int C, int H, int W, int groups,
                                          const std::vector<double>& gamma,
                                          const std::vector<double>& beta,
                                          double eps) {
  std::vector<double> out(x.size());
  const int gs = C / groups;
  const double n = double(gs) * H * W;
  for (int b = 0; b < B; ++b)
    for (int g = 0; g < groups; ++g) {
      double mean = 0;
      for (int s = 0; s < gs; ++s)
        for (int i = 0; i < H * W; ++i)
          mean += x[(std::size_t(b) * C + g * gs + s) * H * W + i];
      mean /= n;
      double var = 0;
      for (int s = 0; s < gs; ++s)
        for (int i = 0; i < H * W; ++i) {
          const double d = x[(std::size_t(b) * C + g * gs + s) * H * W + i] - mean;
          var += d * d;
        }
      var /= n;
      for (int s = 0; s < gs; ++s) {
        const int c = g * gs + s;
        for (int i = 0; i < H * W; ++i) {
          const std::size_t idx = (std::size_t(b) * C + c) * H * W + i;
          out[idx] = gamma[c] * (x[idx] - mean) / std::sqrt(var + eps) + beta[c];
        }
      }
    }
  return out;
}

// Per-fiber matrix-vector product for the grouped linear map.
inline std::vector<double> grouped_linear_ref(const std::vector<double>& x,
                                              int B, int G, int S, int h, int w,
                                              const std::vector<double>& wgt,
                                              const std::vector<double>& bias) {
  std::vector<double> out(x.size());
  for (int b = 0; b < B; ++b)
    for (int g = 0; g < G; ++g)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          for (int o = 0; o < S; ++o) {
            double acc = bias[std::size_t(g) * S + o];
            for (int s = 0; s < S; ++s)
              acc += wgt[(std::size_t(g) * S + o) * S + s] *
                     x[(((std::size_t(b) * G + g) * S + s) * h + y) * w + xx];
            out[(((std::size_t(b) * G + g) * S + o) * h + y) * w + xx] = acc;
          }
  return out;
}

// Explicit 2x2 Haar matrix product: for a block X, computes H X H^T with
// H = (1/sqrt 2) [[1,1],[1,-1]]. Returns {ll, hl(row0 col1), lh(row1 col0), hh}
// laid out as [[ll, hl],[lh, hh]] to match the (vertical, horizontal) axes.
inline void haar_block_ref(double a, double b, double c, double d, double& ll,
                           double& lh, double& hl, double& hh) {
  const double r = 1.0 / std::sqrt(2.0);
  // vertical (row) axis combined first, per column
  const double lo_c0 = r * (a + c), lo_c1 = r * (b + d);
  const double hi_c0 = r * (a - c), hi_c1 = r * (b - d);
  // then the horizontal (column) axis
  ll = r * (lo_c0 + lo_c1);
  hl = r * (lo_c0 - lo_c1);  // high-pass horizontal, low-pass vertical
  lh = r * (hi_c0 + hi_c1);  // low-pass horizontal, high-pass vertical
  hh = r * (hi_c0 - hi_c1);
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(double(a[i]) - b[i]));
  return m;
}

}  // namespace oracle
