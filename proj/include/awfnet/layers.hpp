#pragma once

#include <string>

#include "awfnet/ops.hpp"
#include "awfnet/params.hpp"

namespace awfnet {

template <typename T>
struct Conv2dLayer {
  Tensor<T> weight, bias;  // bias undefined when the layer is bias-free
  int stride = 1;
  int padding = 0;

  static Conv2dLayer make(Registry<T>& reg, const std::string& prefix, int cin,
                          int cout, int k, int stride, int padding,
                          bool with_bias) {
    Conv2dLayer l;
    l.stride = stride;
    l.padding = padding;
    l.weight = reg.uniform_param(prefix + ".weight", {cout, cin, k, k},
                                 std::int64_t(cin) * k * k);
    if (with_bias) l.bias = reg.const_param(prefix + ".bias", {cout}, T(0));
    return l;
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d(x, weight, bias, stride, padding);
  }
};

template <typename T>
struct DepthwiseConv2dLayer {
  Tensor<T> weight, bias;
  int padding = 1;

  static DepthwiseConv2dLayer make(Registry<T>& reg, const std::string& prefix,
                                   int channels, int k, bool with_bias) {
    DepthwiseConv2dLayer l;
    l.padding = k / 2;
    l.weight = reg.uniform_param(prefix + ".weight", {channels, 1, k, k},
                                 std::int64_t(k) * k);
    if (with_bias) l.bias = reg.const_param(prefix + ".bias", {channels}, T(0));
    return l;
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return depthwise_conv2d(x, weight, bias, padding);
  }
};

template <typename T>
struct BatchNorm2dLayer {
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;  // buffers
  T momentum = T(0.1);
  T eps = T(1e-5);

  static BatchNorm2dLayer make(Registry<T>& reg, const std::string& prefix,
                               int channels) {
    BatchNorm2dLayer l;
    l.gamma = reg.const_param(prefix + ".gamma", {channels}, T(1));
    l.beta = reg.const_param(prefix + ".beta", {channels}, T(0));
    l.running_mean = reg.buffer(prefix + ".running_mean", {channels}, T(0));
    l.running_var = reg.buffer(prefix + ".running_var", {channels}, T(1));
    return l;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    return batch_norm(x, gamma, beta, running_mean.mutable_data(),
                      running_var.mutable_data(), mode, momentum, eps);
  }
};

template <typename T>
struct GroupNorm2dLayer {
  Tensor<T> gamma, beta;
  int groups = 1;
  T eps = T(1e-5);

  static GroupNorm2dLayer make(Registry<T>& reg, const std::string& prefix,
                               int channels, int groups) {
    GroupNorm2dLayer l;
    l.groups = groups;
    l.gamma = reg.const_param(prefix + ".gamma", {channels}, T(1));
    l.beta = reg.const_param(prefix + ".beta", {channels}, T(0));
    return l;
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return group_norm(x, groups, gamma, beta, eps);
  }
};

template <typename T>
struct LinearLayer {
  Tensor<T> weight, bias;

  static LinearLayer make(Registry<T>& reg, const std::string& prefix,
                          int in_features, int out_features,
                          bool with_bias = true) {
    LinearLayer l;
    l.weight = reg.uniform_param(prefix + ".weight", {out_features, in_features},
                                 in_features);
    if (with_bias) l.bias = reg.const_param(prefix + ".bias", {out_features}, T(0));
    return l;
  }

  Tensor<T> forward(const Tensor<T>& x) const { return linear(x, weight, bias); }
};

}  // namespace awfnet
