#pragma once

#include <string>
#include <utility>
#include <vector>

#include "awfnet/awf.hpp"

namespace awfnet {

enum class StemKind { small_cnn, resnet18_like };

inline const char* stem_kind_name(StemKind k) {
  return k == StemKind::small_cnn ? "small_cnn" : "resnet18_like";
}

inline StemKind stem_kind_from_name(const std::string& s) {
  if (s == "small_cnn") return StemKind::small_cnn;
  if (s == "resnet18_like") return StemKind::resnet18_like;
  throw ConfigError("unknown stem kind '" + s + "'");
}

/// Declarative description of the whole network: stem, number of appended
/// AWF blocks, classifier head.
struct NetworkSpec {
  StemKind stem = StemKind::small_cnn;
  std::vector<int> stem_channels = {8, 16, 32};
  int num_awf_blocks = 3;
  int num_classes = 2;
  int in_channels = 1;
  int input_h = 64;
  int input_w = 64;

  static int conv_out(int extent, int k, int stride, int padding) {
    return (extent + 2 * padding - k) / stride + 1;
  }

  /// Spatial size of the stem output (where the AWF blocks sit).
  std::pair<int, int> stem_output_hw() const {
    int h = input_h, w = input_w;
    if (stem == StemKind::small_cnn) {
      for (std::size_t i = 0; i < stem_channels.size(); ++i) {
        h = conv_out(h, 3, 2, 1);
        w = conv_out(w, 3, 2, 1);
      }
    } else {
      h = conv_out(h, 7, 2, 3);
      w = conv_out(w, 7, 2, 3);
      for (std::size_t i = 1; i < stem_channels.size(); ++i) {
        h = conv_out(h, 3, 2, 1);
        w = conv_out(w, 3, 2, 1);
      }
    }
    return {h, w};
  }

  int stem_out_channels() const { return stem_channels.back(); }

  void validate() const {
    if (stem_channels.empty())
      throw ConfigError("network: stem_channels must be nonempty");
    for (int c : stem_channels)
      if (c < 1) throw ConfigError("network: stem channel widths must be >= 1");
    if (num_awf_blocks < 0 || num_awf_blocks > 5)
      throw ConfigError("network: num_awf_blocks must be in [0, 5], got " +
                        std::to_string(num_awf_blocks));
    if (num_classes < 2) throw ConfigError("network: num_classes must be >= 2");
    if (in_channels < 1) throw ConfigError("network: in_channels must be >= 1");
    if (input_h < 1 || input_w < 1)
      throw ConfigError("network: input size must be positive");
    auto [h, w] = stem_output_hw();
    if (h < 1 || w < 1)
      throw ConfigError("network: stem reduces input " +
                        std::to_string(input_h) + "x" + std::to_string(input_w) +
                        " to nothing");
    if (num_awf_blocks > 0 && (h % 2 != 0 || w % 2 != 0))
      throw ConfigError("network: stem output " + std::to_string(h) + "x" +
                        std::to_string(w) +
                        " must be even when AWF blocks are attached");
  }
};

/// Stem -> N AWF blocks -> global average pool -> linear classifier.
/// Construction is deterministic in (spec, cfg, seed); num_awf_blocks = 0
/// reproduces the bare stem baseline parameter-for-parameter.
template <typename T>
class AwfNet {
 public:
  AwfNet(NetworkSpec spec, AwfConfig cfg, std::uint64_t seed)
      : spec_(std::move(spec)), cfg_(cfg), reg_(seed) {
    spec_.validate();
    cfg_.resolve(spec_.stem_out_channels());
    build_stem();
    for (int i = 0; i < spec_.num_awf_blocks; ++i)
      blocks_.push_back(
          AwfBlock<T>::make(reg_, "awf" + std::to_string(i), cfg_));
    head_ = LinearLayer<T>::make(reg_, "head", spec_.stem_out_channels(),
                                 spec_.num_classes, true);
  }

  AwfNet(const AwfNet&) = delete;
  AwfNet& operator=(const AwfNet&) = delete;

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.ndim() != 4 || x.dim(1) != spec_.in_channels ||
        x.dim(2) != spec_.input_h || x.dim(3) != spec_.input_w) {
      throw ShapeError("network: input " + shape_str(x.shape()) +
                       " does not match spec [*, " +
                       std::to_string(spec_.in_channels) + ", " +
                       std::to_string(spec_.input_h) + ", " +
                       std::to_string(spec_.input_w) + "]");
    }
    Tensor<T> h = stem_forward(x, mode);
    for (auto& b : blocks_) h = b.forward(h, mode);
    return head_.forward(global_avg_pool(h));
  }

  Tensor<T> stem_forward(const Tensor<T>& x, Mode mode) {
    if (spec_.stem == StemKind::small_cnn) {
      Tensor<T> h = x;
      for (auto& s : stages_) h = relu(s.bn.forward(s.conv.forward(h), mode));
      return h;
    }
    Tensor<T> h = relu(stem_bn_.forward(stem_conv_.forward(x), mode));
    for (auto& b : rblocks_) {
      Tensor<T> shortcut =
          b.down ? b.down_bn.forward(b.down_conv.forward(h), mode) : h;
      Tensor<T> y = b.bn2.forward(
          b.conv2.forward(relu(b.bn1.forward(b.conv1.forward(h), mode))), mode);
      h = relu(add(y, shortcut));
    }
    return h;
  }

  Registry<T>& registry() { return reg_; }
  const Registry<T>& registry() const { return reg_; }
  const NetworkSpec& spec() const { return spec_; }
  const AwfConfig& config() const { return cfg_; }
  std::vector<AwfBlock<T>>& blocks() { return blocks_; }
  void zero_grad() { reg_.zero_grad(); }

 private:
  struct ConvBnRelu {
    Conv2dLayer<T> conv;
    BatchNorm2dLayer<T> bn;
  };
  struct BasicBlock {
    Conv2dLayer<T> conv1, conv2;
    BatchNorm2dLayer<T> bn1, bn2;
    bool down = false;
    Conv2dLayer<T> down_conv;
    BatchNorm2dLayer<T> down_bn;
  };

  void build_stem() {
    if (spec_.stem == StemKind::small_cnn) {
      int cin = spec_.in_channels;
      for (std::size_t i = 0; i < spec_.stem_channels.size(); ++i) {
        const std::string p = "stem.s" + std::to_string(i);
        ConvBnRelu s;
        s.conv = Conv2dLayer<T>::make(reg_, p + ".conv", cin,
                                      spec_.stem_channels[i], 3, 2, 1, false);
        s.bn = BatchNorm2dLayer<T>::make(reg_, p + ".bn", spec_.stem_channels[i]);
        stages_.push_back(std::move(s));
        cin = spec_.stem_channels[i];
      }
      return;
    }
    // resnet18-like: 7x7/2 entry, then stages of two basic blocks; stages
    // after the first downsample by a stride-2 first block.
    const auto& ch = spec_.stem_channels;
    stem_conv_ = Conv2dLayer<T>::make(reg_, "stem.conv", spec_.in_channels,
                                      ch[0], 7, 2, 3, false);
    stem_bn_ = BatchNorm2dLayer<T>::make(reg_, "stem.bn", ch[0]);
    int cin = ch[0];
    for (std::size_t stage = 0; stage < ch.size(); ++stage) {
      for (int blk = 0; blk < 2; ++blk) {
        const std::string p = "stem.l" + std::to_string(stage) + ".b" +
                              std::to_string(blk);
        const int stride = (stage > 0 && blk == 0) ? 2 : 1;
        BasicBlock b;
        b.conv1 = Conv2dLayer<T>::make(reg_, p + ".conv1", cin, ch[stage], 3,
                                       stride, 1, false);
        b.bn1 = BatchNorm2dLayer<T>::make(reg_, p + ".bn1", ch[stage]);
        b.conv2 = Conv2dLayer<T>::make(reg_, p + ".conv2", ch[stage], ch[stage],
                                       3, 1, 1, false);
        b.bn2 = BatchNorm2dLayer<T>::make(reg_, p + ".bn2", ch[stage]);
        if (stride != 1 || cin != ch[stage]) {
          b.down = true;
          b.down_conv = Conv2dLayer<T>::make(reg_, p + ".down.conv", cin,
                                             ch[stage], 1, stride, 0, false);
          b.down_bn = BatchNorm2dLayer<T>::make(reg_, p + ".down.bn", ch[stage]);
        }
        rblocks_.push_back(std::move(b));
        cin = ch[stage];
      }
    }
  }

  NetworkSpec spec_;
  AwfConfig cfg_;
  Registry<T> reg_;
  std::vector<ConvBnRelu> stages_;
  Conv2dLayer<T> stem_conv_;
  BatchNorm2dLayer<T> stem_bn_;
  std::vector<BasicBlock> rblocks_;
  std::vector<AwfBlock<T>> blocks_;
  LinearLayer<T> head_;
};

}  // namespace awfnet
