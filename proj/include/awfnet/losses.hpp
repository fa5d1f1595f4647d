#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "awfnet/ops.hpp"

namespace awfnet {

enum class LossKind { CE, CS, BC, FL };
enum class SignConvention { convex, literal };

/// Loss selector plus the balanced-confidence hyper-parameters. class_counts
/// is the training-split label frequency prior, fixed for the run.
struct LossConfig {
  LossKind kind = LossKind::CE;
  double alpha = 0.5;
  double lambda = 0.8;
  double t = 2.0;
  double focal_gamma = 2.0;
  std::vector<long> class_counts;
  SignConvention sign = SignConvention::convex;

  void validate(int num_classes) const {
    if (alpha < 0.0 || alpha > 1.0)
      throw ConfigError("loss: alpha must be in [0,1], got " + std::to_string(alpha));
    if (lambda < 0.0) throw ConfigError("loss: lambda must be >= 0");
    if (t < 0.0) throw ConfigError("loss: t must be >= 0");
    if (kind == LossKind::CS || kind == LossKind::BC) {
      if (static_cast<int>(class_counts.size()) != num_classes)
        throw ConfigError("loss: class_counts length " +
                          std::to_string(class_counts.size()) +
                          " does not match num_classes " +
                          std::to_string(num_classes));
      for (long n : class_counts)
        if (n < 1) throw ConfigError("loss: class_counts must be positive");
    }
  }
};

/// Scalar loss (graph-recorded, mean over the batch) plus per-sample values.
template <typename T>
struct LossOutput {
  Tensor<T> value;
  std::vector<T> per_sample;
};

namespace detail {

template <typename T>
inline void check_targets(const Tensor<T>& logits, const std::vector<int>& targets) {
  require_ndim("loss", logits, 2);
  const int N = logits.dim(0), C = logits.dim(1);
  if (N < 1) throw ContractError("loss: empty batch");
  if (static_cast<int>(targets.size()) != N)
    throw ContractError("loss: targets length " + std::to_string(targets.size()) +
                        " does not match batch size " + std::to_string(N));
  for (int y : targets)
    if (y < 0 || y >= C)
      throw LabelError("loss: target " + std::to_string(y) +
                       " outside [0, " + std::to_string(C) + ")");
}

template <typename T>
inline std::vector<T> row_softmax(const T* row, int C) {
  T m = row[0];
  for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
  std::vector<T> p(C);
  T denom = 0;
  for (int c = 0; c < C; ++c) {
    p[c] = std::exp(row[c] - m);
    denom += p[c];
  }
  for (int c = 0; c < C; ++c) p[c] /= denom;
  return p;
}

// Shared forward/backward for the softmax-family losses: per-sample loss
//   l_i = log( sum_k w_k exp(z_k - m) ) + m - z_y
// with competitor weights w (w_y = 1). CE is w = 1; CS scales competitors
// by the balanced confidence factors, held constant in the backward pass.
template <typename T>
LossOutput<T> weighted_softmax_loss(const char* name, const Tensor<T>& logits,
                                    const std::vector<int>& targets,
                                    const std::vector<T>* weights /* N*C or null */) {
  const int N = logits.dim(0), C = logits.dim(1);
  std::vector<T> per(N);
  std::vector<T> grad(std::size_t(N) * C);
  for (int n = 0; n < N; ++n) {
    const T* row = logits.data().data() + std::size_t(n) * C;
    const int y = targets[n];
    T m = row[0];
    for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
    T denom = 0;
    for (int c = 0; c < C; ++c) {
      const T w = weights ? (*weights)[std::size_t(n) * C + c] : T(1);
      denom += w * std::exp(row[c] - m);
    }
    per[n] = std::log(denom) + (m - row[y]);
    for (int c = 0; c < C; ++c) {
      const T w = weights ? (*weights)[std::size_t(n) * C + c] : T(1);
      grad[std::size_t(n) * C + c] = w * std::exp(row[c] - m) / denom;
    }
    grad[std::size_t(n) * C + y] -= T(1);
  }
  T mean = 0;
  for (T v : per) mean += v;
  mean /= T(N);
  auto value = make_op<T>(
      name, {1}, {mean}, {logits},
      [ln = logits.node(), g = std::move(grad), N](const Node<T>& o) {
        if (!ln->requires_grad) return;
        auto& gx = ln->ensure_grad();
        const T s = o.grad[0] / T(N);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * g[i];
      });
  return {value, std::move(per)};
}

}  // namespace detail

/// Mean softmax cross-entropy over the batch.
template <typename T>
LossOutput<T> ce_loss(const Tensor<T>& logits, const std::vector<int>& targets) {
  detail::check_targets(logits, targets);
  return detail::weighted_softmax_loss<T>("ce_loss", logits, targets, nullptr);
}

/// Closed-form CE logit gradient (p - y)/N, as a plain (graph-free) tensor.
template <typename T>
Tensor<T> ce_gradient_closed_form(const Tensor<T>& logits,
                                  const std::vector<int>& targets) {
  detail::check_targets(logits, targets);
  const int N = logits.dim(0), C = logits.dim(1);
  std::vector<T> g(std::size_t(N) * C);
  for (int n = 0; n < N; ++n) {
    auto p = detail::row_softmax(logits.data().data() + std::size_t(n) * C, C);
    for (int c = 0; c < C; ++c) g[std::size_t(n) * C + c] = p[c] / T(N);
    g[std::size_t(n) * C + targets[n]] -= T(1) / T(N);
  }
  return Tensor<T>::from_data({N, C}, std::move(g));
}

/// Balanced confidence factors S_k = T_k * M_k for one sample: the factor
/// applied to competitor k's logit when the target class is `target`.
/// S_target is defined as 1.
template <typename T>
std::vector<T> balance_factors(const std::vector<T>& p,
                               const std::vector<long>& counts, int target,
                               T lambda, T t) {
  const int C = static_cast<int>(p.size());
  if (static_cast<int>(counts.size()) != C)
    throw ConfigError("balance_factors: counts length does not match classes");
  if (target < 0 || target >= C)
    throw LabelError("balance_factors: target out of range");
  constexpr T kProbFloor = T(1e-12);
  std::vector<T> s(C, T(1));
  const T pj = p[target];
  const long nj = counts[target];
  for (int k = 0; k < C; ++k) {
    if (k == target) continue;
    const T tf = p[k] <= pj ? T(1) : std::pow(p[k] / std::max(pj, kProbFloor), lambda);
    const T mf = nj <= counts[k] ? T(1) : std::pow(T(nj) / T(counts[k]), t);
    s[k] = tf * mf;
  }
  return s;
}

/// Per-sample factor matrix [N,C] from the current softmax probabilities.
template <typename T>
std::vector<T> balance_factor_matrix(const Tensor<T>& logits,
                                     const std::vector<int>& targets,
                                     const LossConfig& cfg) {
  const int N = logits.dim(0), C = logits.dim(1);
  std::vector<T> s(std::size_t(N) * C);
  for (int n = 0; n < N; ++n) {
    auto p = detail::row_softmax(logits.data().data() + std::size_t(n) * C, C);
    auto row = balance_factors<T>(p, cfg.class_counts, targets[n], T(cfg.lambda),
                                  T(cfg.t));
    std::copy(row.begin(), row.end(), s.begin() + std::size_t(n) * C);
  }
  return s;
}

/// Confidence-boost loss with externally supplied factors (the factors are
/// non-differentiated constants; this variant is what the gradient checker
/// probes).
template <typename T>
LossOutput<T> cs_loss_with_factors(const Tensor<T>& logits,
                                   const std::vector<int>& targets,
                                   const std::vector<T>& factors) {
  detail::check_targets(logits, targets);
  if (factors.size() != logits.data().size())
    throw ContractError("cs_loss: factor matrix size mismatch");
  return detail::weighted_softmax_loss<T>("cs_loss", logits, targets, &factors);
}

/// Confidence-boost loss: competitors' exponentials scaled by S = T * M
/// computed from the current probabilities and the class-count prior.
template <typename T>
LossOutput<T> cs_loss(const Tensor<T>& logits, const std::vector<int>& targets,
                      const LossConfig& cfg) {
  detail::check_targets(logits, targets);
  cfg.validate(logits.dim(1));
  auto factors = balance_factor_matrix(logits, targets, cfg);
  return cs_loss_with_factors(logits, targets, factors);
}

/// Balanced confidence loss. Default is the convex combination
/// alpha*CS + (1-alpha)*CE; the literal convention -alpha*CS + (1-alpha)*CE
/// is kept behind the flag for fidelity experiments.
template <typename T>
LossOutput<T> bc_loss(const Tensor<T>& logits, const std::vector<int>& targets,
                      const LossConfig& cfg) {
  detail::check_targets(logits, targets);
  cfg.validate(logits.dim(1));
  auto cs = cs_loss(logits, targets, cfg);
  auto ce = ce_loss(logits, targets);
  const T a = T(cfg.alpha);
  const T acs = cfg.sign == SignConvention::convex ? a : -a;
  LossOutput<T> out;
  out.value = add(scale(cs.value, acs), scale(ce.value, T(1) - a));
  out.per_sample.resize(cs.per_sample.size());
  for (std::size_t i = 0; i < out.per_sample.size(); ++i)
    out.per_sample[i] = acs * cs.per_sample[i] + (T(1) - a) * ce.per_sample[i];
  return out;
}

/// Standard focal loss baseline, L = mean (1-p_y)^gamma * (-log p_y).
template <typename T>
LossOutput<T> focal_loss(const Tensor<T>& logits, const std::vector<int>& targets,
                         T gamma) {
  detail::check_targets(logits, targets);
  if (gamma < T(0)) throw ConfigError("focal_loss: gamma must be >= 0");
  const int N = logits.dim(0), C = logits.dim(1);
  std::vector<T> per(N);
  std::vector<T> grad(std::size_t(N) * C);
  constexpr T kFloor = T(1e-12);
  for (int n = 0; n < N; ++n) {
    const T* row = logits.data().data() + std::size_t(n) * C;
    const int y = targets[n];
    auto p = detail::row_softmax(row, C);
    T m = row[0];
    for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
    T denom = 0;
    for (int c = 0; c < C; ++c) denom += std::exp(row[c] - m);
    const T ce = std::log(denom) + (m - row[y]);  // -log p_y, stable
    const T q = std::max(T(1) - p[y], T(0));
    const T mod = std::pow(q, gamma);
    per[n] = mod * ce;
    // d/dz_c = (delta_cy - p_c) * (-gamma*q^(gamma-1)*p_y*ce - q^gamma)
    const T inner = q < kFloor
                        ? -mod
                        : -gamma * std::pow(q, gamma - T(1)) * p[y] * ce - mod;
    for (int c = 0; c < C; ++c) {
      const T delta = c == y ? T(1) : T(0);
      grad[std::size_t(n) * C + c] = (delta - p[c]) * inner;
    }
  }
  T mean = 0;
  for (T v : per) mean += v;
  mean /= T(N);
  auto value = detail::make_op<T>(
      "focal_loss", {1}, {mean}, {logits},
      [ln = logits.node(), g = std::move(grad), N](const detail::Node<T>& o) {
        if (!ln->requires_grad) return;
        auto& gx = ln->ensure_grad();
        const T s = o.grad[0] / T(N);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * g[i];
      });
  return {value, std::move(per)};
}

/// Dispatch on LossConfig::kind.
template <typename T>
LossOutput<T> compute_loss(const Tensor<T>& logits, const std::vector<int>& targets,
                           const LossConfig& cfg) {
  switch (cfg.kind) {
    case LossKind::CE:
      return ce_loss(logits, targets);
    case LossKind::CS:
      return cs_loss(logits, targets, cfg);
    case LossKind::BC:
      return bc_loss(logits, targets, cfg);
    case LossKind::FL:
      return focal_loss(logits, targets, T(cfg.focal_gamma));
  }
  throw ConfigError("compute_loss: unknown loss kind");
}

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::CE: return "ce";
    case LossKind::CS: return "cs";
    case LossKind::BC: return "bc";
    case LossKind::FL: return "fl";
  }
  return "?";
}

inline LossKind loss_kind_from_name(const std::string& s) {
  if (s == "ce") return LossKind::CE;
  if (s == "cs") return LossKind::CS;
  if (s == "bc") return LossKind::BC;
  if (s == "fl") return LossKind::FL;
  throw ConfigError("unknown loss kind '" + s + "' (expected ce|cs|bc|fl)");
}

}  // namespace awfnet
