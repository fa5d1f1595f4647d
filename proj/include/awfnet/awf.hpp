#pragma once

#include <array>
#include <string>
#include <vector>

#include "awfnet/layers.hpp"
#include "awfnet/wavelet.hpp"

namespace awfnet {

enum class WeightingVariant { grouped_linear, identity, scalar_gate };

inline const char* weighting_variant_name(WeightingVariant v) {
  switch (v) {
    case WeightingVariant::grouped_linear: return "grouped_linear";
    case WeightingVariant::identity: return "identity";
    case WeightingVariant::scalar_gate: return "scalar_gate";
  }
  return "?";
}

inline WeightingVariant weighting_variant_from_name(const std::string& s) {
  if (s == "grouped_linear") return WeightingVariant::grouped_linear;
  if (s == "identity") return WeightingVariant::identity;
  if (s == "scalar_gate") return WeightingVariant::scalar_gate;
  throw ConfigError("unknown weighting variant '" + s + "'");
}

/// Per-block configuration. groups == 0 picks the largest group size in
/// {4, 2, 1} dividing the channel count, so C=32 gives G=8 (S=4).
struct AwfConfig {
  int channels = 0;  // 0 = derive from the stem's output width
  int groups = 0;
  int expansion_ratio = 2;
  WeightingVariant variant = WeightingVariant::grouped_linear;
  bool awf_mixer = true;  // false builds the channel-mixer-only ablation block

  int group_size() const { return channels / groups; }

  void resolve(int stem_out_channels) {
    if (channels == 0) channels = stem_out_channels;
    if (channels != stem_out_channels)
      throw ConfigError("awf: channels " + std::to_string(channels) +
                        " do not match stem output " +
                        std::to_string(stem_out_channels));
    if (groups == 0) {
      for (int s : {4, 2, 1})
        if (channels % s == 0) {
          groups = channels / s;
          break;
        }
    }
    validate();
  }

  void validate() const {
    if (channels < 1) throw ConfigError("awf: channels must be >= 1");
    if (groups < 1 || channels % groups != 0)
      throw ConfigError("awf: channels " + std::to_string(channels) +
                        " not divisible by groups " + std::to_string(groups));
    if (expansion_ratio < 1)
      throw ConfigError("awf: expansion_ratio must be >= 1");
  }
};

/// BN -> Conv1x1 (C -> r*C) -> DConv3x3 -> Conv1x1 (-> C) -> BN, with no
/// activation and no residual.
template <typename T>
struct ChannelMixer {
  BatchNorm2dLayer<T> bn_in, bn_out;
  Conv2dLayer<T> expand, project;
  DepthwiseConv2dLayer<T> dconv;

  static ChannelMixer make(Registry<T>& reg, const std::string& prefix, int c,
                           int ratio) {
    ChannelMixer m;
    const int hidden = c * ratio;
    // weight-only convolutions: the surrounding BNs own the affine freedom,
    // and a pre-BN bias would be a dead parameter
    m.bn_in = BatchNorm2dLayer<T>::make(reg, prefix + ".bn_in", c);
    m.expand = Conv2dLayer<T>::make(reg, prefix + ".expand", c, hidden, 1, 1, 0,
                                    /*with_bias=*/false);
    m.dconv = DepthwiseConv2dLayer<T>::make(reg, prefix + ".dconv", hidden, 3,
                                            /*with_bias=*/false);
    m.project = Conv2dLayer<T>::make(reg, prefix + ".project", hidden, c, 1, 1,
                                     0, /*with_bias=*/false);
    m.bn_out = BatchNorm2dLayer<T>::make(reg, prefix + ".bn_out", c);
    return m;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    return bn_out.forward(
        project.forward(dconv.forward(expand.forward(bn_in.forward(x, mode)))),
        mode);
  }
};

/// Learnable state of the weighting path for one subband.
template <typename T>
struct SubbandWeighting {
  GroupNorm2dLayer<T> norm;
  Tensor<T> w1, b1, w2, b2;  // grouped_linear
  Tensor<T> gate;            // scalar_gate

  static SubbandWeighting make(Registry<T>& reg, const std::string& prefix,
                               const AwfConfig& cfg) {
    SubbandWeighting s;
    s.norm = GroupNorm2dLayer<T>::make(reg, prefix + ".norm", cfg.channels,
                                       cfg.groups);
    const int G = cfg.groups, S = cfg.group_size();
    if (cfg.variant == WeightingVariant::grouped_linear) {
      s.w1 = reg.uniform_param(prefix + ".w1", {G, S, S}, S);
      s.b1 = reg.const_param(prefix + ".b1", {G, S}, T(0));
      s.w2 = reg.uniform_param(prefix + ".w2", {G, S, S}, S);
      s.b2 = reg.const_param(prefix + ".b2", {G, S}, T(0));
    } else {
      s.gate = reg.const_param(prefix + ".gate", {1}, T(1));
    }
    return s;
  }
};

/// One Adaptive Wavelet Filter block: channel mixer followed by the wavelet
/// token mixer (analysis, adaptive group linear weighting, synthesis) and the
/// convolutional fusion with the block input.
template <typename T>
struct AwfBlock {
  AwfConfig cfg;
  ChannelMixer<T> mixer;
  std::vector<SubbandWeighting<T>> weighting;  // {ll,lh,hl,hh}; empty for identity
  Conv2dLayer<T> fuse_pw;    // 1x1 on the reconstruction
  Conv2dLayer<T> fuse_conv;  // 3x3, 2C -> C

  static AwfBlock make(Registry<T>& reg, const std::string& prefix,
                       const AwfConfig& cfg) {
    cfg.validate();
    AwfBlock b;
    b.cfg = cfg;
    b.mixer = ChannelMixer<T>::make(reg, prefix + ".mixer", cfg.channels,
                                    cfg.expansion_ratio);
    if (!cfg.awf_mixer) return b;
    if (cfg.variant != WeightingVariant::identity) {
      static constexpr const char* kBands[4] = {"ll", "lh", "hl", "hh"};
      for (int i = 0; i < 4; ++i)
        b.weighting.push_back(SubbandWeighting<T>::make(
            reg, prefix + ".aglw." + kBands[i], cfg));
    }
    b.fuse_pw = Conv2dLayer<T>::make(reg, prefix + ".fuse.pw", cfg.channels,
                                     cfg.channels, 1, 1, 0, true);
    b.fuse_conv = Conv2dLayer<T>::make(reg, prefix + ".fuse.conv",
                                       2 * cfg.channels, cfg.channels, 3, 1, 1,
                                       true);
    return b;
  }

  /// Adaptive group linear weighting of one subband: normalize, mix the
  /// channel fiber within each group, gate the original subband with the
  /// result (the product uses the pre-normalization subband).
  Tensor<T> weight_band(const Tensor<T>& band, int idx) const {
    if (cfg.variant == WeightingVariant::identity) return mul(band, band);
    const auto& wgt = weighting[static_cast<std::size_t>(idx)];
    Tensor<T> normed = wgt.norm.forward(band);
    if (cfg.variant == WeightingVariant::scalar_gate)
      return mul(scale_by(normed, wgt.gate), band);
    const int B = band.dim(0), h = band.dim(2), w = band.dim(3);
    const int G = cfg.groups, S = cfg.group_size();
    Tensor<T> grouped = reshape(normed, {B, G, S, h, w});
    Tensor<T> mixed = grouped_linear(relu(grouped_linear(grouped, wgt.w1, wgt.b1)),
                                     wgt.w2, wgt.b2);
    return mul(reshape(mixed, {B, cfg.channels, h, w}), band);
  }

  SubbandSet<T> aglw(const SubbandSet<T>& s) const {
    SubbandSet<T> out;
    out.ll = weight_band(s.ll, 0);
    out.lh = weight_band(s.lh, 1);
    out.hl = weight_band(s.hl, 2);
    out.hh = weight_band(s.hh, 3);
    return out;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> xhat = mixer.forward(x, mode);
    if (!cfg.awf_mixer) return xhat;
    SubbandSet<T> bands = dwt2(xhat);
    Tensor<T> xout = add(xhat, idwt2(aglw(bands)));
    return fuse_conv.forward(concat_channels(x, fuse_pw.forward(xout)));
  }
};

}  // namespace awfnet
