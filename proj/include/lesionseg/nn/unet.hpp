#pragma once

// Miniature U-Net. Each resolution level runs two padded 3x3 conv + ReLU
// blocks; the encoder max-pools between levels and the decoder upsamples with
// a stride-2 transposed conv, concatenates [skip, upsampled] and runs two
// more conv blocks. A final 1x1 conv yields the two score planes.
//
// Channels: level l has base * 2^l, the bottleneck base * 2^depth.
//
// Parameters live in one flat vector, ordered: encoder levels 0..depth-1
// (conv1 w,b, conv2 w,b), bottleneck (conv1 w,b, conv2 w,b), decoder levels
// depth-1..0 (up w,b, conv1 w,b, conv2 w,b), final 1x1 (w,b).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lesionseg/error.hpp"
#include "lesionseg/nn/layers.hpp"
#include "lesionseg/nn/tensor.hpp"
#include "lesionseg/rng.hpp"

namespace lesionseg::nn {

struct UNetConfig {
  std::size_t depth = 3;
  std::size_t base_channels = 8;
  std::size_t in_channels = 3;
  std::size_t out_channels = 2;

  std::size_t channels_at(std::size_t level) const { return base_channels << level; }
  std::size_t size_multiple() const { return std::size_t{1} << depth; }

  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

inline void validate(const UNetConfig& cfg) {
  if (cfg.depth < 1) throw InvalidArgument("U-Net depth must be >= 1");
  if (cfg.depth > 16) throw InvalidArgument("U-Net depth must be <= 16");
  if (cfg.base_channels < 1) throw InvalidArgument("U-Net base channels must be >= 1");
  if (cfg.in_channels < 1 || cfg.out_channels < 1) {
    throw InvalidArgument("U-Net needs at least one input and one output channel");
  }
  if ((cfg.base_channels << cfg.depth) >> cfg.depth != cfg.base_channels) {
    throw InvalidArgument("U-Net channel count overflows");
  }
}

enum class LayerKind { conv3x3, upconv2x2, conv1x1 };

struct LayerSpec {
  LayerKind kind;
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t weight_offset;
  std::size_t bias_offset;

  std::size_t kernel_area() const {
    switch (kind) {
      case LayerKind::conv3x3: return 9;
      case LayerKind::upconv2x2: return 4;
      case LayerKind::conv1x1: return 1;
    }
    return 0;
  }
  std::size_t weight_count() const { return in_channels * out_channels * kernel_area(); }
  std::size_t fan_in() const { return in_channels * kernel_area(); }
};

// Layers in canonical parameter order with their offsets.
struct UNetLayout {
  std::vector<LayerSpec> layers;
  std::size_t param_count = 0;

  explicit UNetLayout(const UNetConfig& cfg) {
    validate(cfg);
    auto add = [&](LayerKind kind, std::size_t in, std::size_t out) {
      LayerSpec s{kind, in, out, param_count, 0};
      param_count += s.weight_count();
      s.bias_offset = param_count;
      param_count += out;
      layers.push_back(s);
    };
    std::size_t in = cfg.in_channels;
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      add(LayerKind::conv3x3, in, cfg.channels_at(l));
      add(LayerKind::conv3x3, cfg.channels_at(l), cfg.channels_at(l));
      in = cfg.channels_at(l);
    }
    add(LayerKind::conv3x3, in, cfg.channels_at(cfg.depth));
    add(LayerKind::conv3x3, cfg.channels_at(cfg.depth), cfg.channels_at(cfg.depth));
    for (std::size_t l = cfg.depth; l-- > 0;) {
      add(LayerKind::upconv2x2, cfg.channels_at(l + 1), cfg.channels_at(l));
      add(LayerKind::conv3x3, 2 * cfg.channels_at(l), cfg.channels_at(l));
      add(LayerKind::conv3x3, cfg.channels_at(l), cfg.channels_at(l));
    }
    add(LayerKind::conv1x1, cfg.channels_at(0), cfg.out_channels);
  }

  // Index helpers into `layers`.
  static std::size_t encoder_conv(std::size_t level, int which) { return 2 * level + which; }
  static std::size_t bottleneck_conv(std::size_t depth, int which) { return 2 * depth + which; }
  // Decoder level l is visited at step (depth-1-l); each step owns 3 layers.
  static std::size_t decoder_layer(std::size_t depth, std::size_t level, int which) {
    return 2 * depth + 2 + 3 * (depth - 1 - level) + which;
  }
  static std::size_t final_conv(std::size_t depth) { return 2 * depth + 2 + 3 * depth; }
};

inline std::size_t unet_param_count(const UNetConfig& cfg) { return UNetLayout(cfg).param_count; }

// Weights uniform in [-b, b] with b = sqrt(6 / fan_in); biases zero.
template <typename T = float>
std::vector<T> unet_init(const UNetConfig& cfg, std::uint64_t seed) {
  const UNetLayout layout(cfg);
  std::vector<T> params(layout.param_count, T(0));
  Rng rng(seed);
  for (const auto& layer : layout.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.fan_in()));
    for (std::size_t i = 0; i < layer.weight_count(); ++i) {
      params[layer.weight_offset + i] = static_cast<T>(uniform(rng, -bound, bound));
    }
  }
  return params;
}

// Everything backward needs from one forward pass of one image.
template <typename T>
struct ForwardCache {
  struct Block {
    Tensor<T> input;  // input to conv1 (for decoder blocks, the concatenation)
    Tensor<T> pre1, act1, pre2, act2;
  };
  std::size_t height = 0, width = 0;
  std::size_t param_count = 0;
  Activation activation = Activation::relu;
  std::vector<Block> encoder;
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  std::vector<Tensor<T>> pooled;
  Block bottleneck;
  std::vector<Tensor<T>> up_input;  // indexed by decoder level
  std::vector<Block> decoder;       // indexed by decoder level
  Tensor<T> final_input;
  Tensor<T> scores;
};

namespace detail {

template <typename T>
void run_conv(const LayerSpec& s, std::span<const T> p, const Tensor<T>& in, Tensor<T>& out) {
  const T* w = p.data() + s.weight_offset;
  const T* b = p.data() + s.bias_offset;
  switch (s.kind) {
    case LayerKind::conv3x3: conv3x3_forward(in, w, b, s.out_channels, out); break;
    case LayerKind::upconv2x2: upconv2x2_forward(in, w, b, s.out_channels, out); break;
    case LayerKind::conv1x1: conv1x1_forward(in, w, b, s.out_channels, out); break;
  }
}

template <typename T>
void run_conv_backward(const LayerSpec& s, std::span<const T> p, const Tensor<T>& in,
                       const Tensor<T>& grad_out, Tensor<T>* grad_in, std::span<T> grad) {
  const T* w = p.data() + s.weight_offset;
  T* gw = grad.data() + s.weight_offset;
  T* gb = grad.data() + s.bias_offset;
  switch (s.kind) {
    case LayerKind::conv3x3: conv3x3_backward(in, grad_out, w, grad_in, gw, gb); break;
    case LayerKind::upconv2x2: upconv2x2_backward(in, grad_out, w, grad_in, gw, gb); break;
    case LayerKind::conv1x1: conv1x1_backward(in, grad_out, w, grad_in, gw, gb); break;
  }
}

template <typename T>
void block_forward(const UNetLayout& layout, std::size_t first_layer, std::span<const T> p,
                   Activation act, typename ForwardCache<T>::Block& blk) {
  run_conv(layout.layers[first_layer], p, blk.input, blk.pre1);
  activation_forward(act, blk.pre1, blk.act1);
  run_conv(layout.layers[first_layer + 1], p, blk.act1, blk.pre2);
  activation_forward(act, blk.pre2, blk.act2);
}

// Returns the gradient with respect to blk.input.
template <typename T>
Tensor<T> block_backward(const UNetLayout& layout, std::size_t first_layer, std::span<const T> p,
                         Activation act, const typename ForwardCache<T>::Block& blk,
                         Tensor<T> grad_act2, std::span<T> grad) {
  activation_backward(act, blk.pre2, grad_act2);
  Tensor<T> grad_act1;
  run_conv_backward(layout.layers[first_layer + 1], p, blk.act1, grad_act2, &grad_act1, grad);
  activation_backward(act, blk.pre1, grad_act1);
  Tensor<T> grad_in;
  run_conv_backward(layout.layers[first_layer], p, blk.input, grad_act1, &grad_in, grad);
  return grad_in;
}

}  // namespace detail

// Forward pass for one image. Returns the score tensor (out_channels x H x W)
// and fills `cache` when given.
template <typename T>
Tensor<T> unet_forward(std::span<const T> params, const UNetConfig& cfg, const Tensor<T>& input,
                       ForwardCache<T>* cache = nullptr, Activation act = Activation::relu) {
  const UNetLayout layout(cfg);
  if (params.size() != layout.param_count) {
    throw InvalidArgument("parameter vector has " + std::to_string(params.size()) +
                          " entries, config needs " + std::to_string(layout.param_count));
  }
  if (input.channels != cfg.in_channels) throw InvalidArgument("input channel count mismatch");
  const std::size_t m = cfg.size_multiple();
  if (input.height == 0 || input.width == 0 || input.height % m != 0 || input.width % m != 0) {
    throw InvalidArgument("input size " + std::to_string(input.width) + "x" +
                          std::to_string(input.height) + " is not divisible by 2^depth = " +
                          std::to_string(m));
  }

  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c = ForwardCache<T>{};
  c.height = input.height;
  c.width = input.width;
  c.param_count = layout.param_count;
  c.activation = act;
  c.encoder.resize(cfg.depth);
  c.pool_argmax.resize(cfg.depth);
  c.pooled.resize(cfg.depth);
  c.up_input.resize(cfg.depth);
  c.decoder.resize(cfg.depth);

  const Tensor<T>* x = &input;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    auto& blk = c.encoder[l];
    blk.input = *x;
    detail::block_forward(layout, UNetLayout::encoder_conv(l, 0), params, act, blk);
    maxpool2x2_forward(blk.act2, c.pooled[l], c.pool_argmax[l]);
    x = &c.pooled[l];
  }
  c.bottleneck.input = *x;
  detail::block_forward(layout, UNetLayout::bottleneck_conv(cfg.depth, 0), params, act, c.bottleneck);

  const Tensor<T>* below = &c.bottleneck.act2;
  for (std::size_t l = cfg.depth; l-- > 0;) {
    c.up_input[l] = *below;
    Tensor<T> up;
    detail::run_conv(layout.layers[UNetLayout::decoder_layer(cfg.depth, l, 0)], params, *below, up);
    auto& blk = c.decoder[l];
    blk.input = concat_channels(c.encoder[l].act2, up);
    detail::block_forward(layout, UNetLayout::decoder_layer(cfg.depth, l, 1), params, act, blk);
    below = &blk.act2;
  }
  c.final_input = *below;
  detail::run_conv(layout.layers[UNetLayout::final_conv(cfg.depth)], params, c.final_input, c.scores);
  return c.scores;
}

// Accumulates dLoss/dParams into `grad` (length = parameter count).
template <typename T>
void unet_backward(std::span<const T> params, const UNetConfig& cfg, const ForwardCache<T>& c,
                   const Tensor<T>& grad_scores, std::span<T> grad) {
  const UNetLayout layout(cfg);
  if (c.param_count != layout.param_count || params.size() != layout.param_count ||
      grad.size() != layout.param_count || c.encoder.size() != cfg.depth) {
    throw InvalidArgument("forward cache does not match this configuration");
  }
  if (grad_scores.channels != cfg.out_channels || grad_scores.height != c.height ||
      grad_scores.width != c.width || c.scores.data.size() != grad_scores.data.size()) {
    throw InvalidArgument("score gradient does not match the cached forward pass");
  }
  const Activation act = c.activation;

  Tensor<T> grad_x;
  detail::run_conv_backward(layout.layers[UNetLayout::final_conv(cfg.depth)], params, c.final_input,
                            grad_scores, &grad_x, grad);

  // Gradients flowing into each encoder level's output through its skip path.
  std::vector<Tensor<T>> skip_grad(cfg.depth);
  // Decoder levels unwind from the top (level 0) down to the bottleneck.
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const auto& blk = c.decoder[l];
    Tensor<T> grad_cat = detail::block_backward(
        layout, UNetLayout::decoder_layer(cfg.depth, l, 1), params, act, blk, std::move(grad_x), grad);
    Tensor<T> grad_up;
    split_channels(grad_cat, c.encoder[l].act2.channels, skip_grad[l], grad_up);
    detail::run_conv_backward(layout.layers[UNetLayout::decoder_layer(cfg.depth, l, 0)], params,
                              c.up_input[l], grad_up, &grad_x, grad);
  }

  grad_x = detail::block_backward(layout, UNetLayout::bottleneck_conv(cfg.depth, 0), params, act,
                                  c.bottleneck, std::move(grad_x), grad);

  for (std::size_t l = cfg.depth; l-- > 0;) {
    const auto& blk = c.encoder[l];
    Tensor<T> grad_act2 = std::move(skip_grad[l]);
    maxpool2x2_backward(grad_x, c.pool_argmax[l], grad_act2);
    grad_x = detail::block_backward(layout, UNetLayout::encoder_conv(l, 0), params, act, blk,
                                    std::move(grad_act2), grad);
  }
}

}  // namespace lesionseg::nn
