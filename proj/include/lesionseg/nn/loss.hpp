#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lesionseg/error.hpp"
#include "lesionseg/image.hpp"
#include "lesionseg/nn/tensor.hpp"

namespace lesionseg::nn {

struct ClassWeights {
  double background = 1.0;
  double foreground = 1.0;

  friend bool operator==(const ClassWeights&, const ClassWeights&) = default;
};

// Equalizes the expected weight mass of both classes:
// p * w_fg = (1 - p) * w_bg = 0.5.
inline ClassWeights class_weights_from_proportion(double p_mole) {
  if (!(p_mole > 0.0 && p_mole < 1.0)) {
    throw InvalidArgument("lesion proportion must lie strictly between 0 and 1");
  }
  return {0.5 / (1.0 - p_mole), 0.5 / p_mole};
}

template <typename T>
struct LossResult {
  double loss = 0.0;
  std::vector<Tensor<T>> grad;  // dLoss/dScores, one per batch element
};

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Class-weighted cross entropy over two-channel score tensors, reduced as a
// weighted mean over every pixel of the batch.
template <typename T>
LossResult<T> weighted_ce_loss(std::span<const Tensor<T>> scores, std::span<const Mask> masks,
                               const ClassWeights& weights) {
  if (scores.size() != masks.size() || scores.empty()) {
    throw InvalidArgument("loss needs equal, non-zero numbers of score maps and masks");
  }
  if (!(weights.background > 0.0 && weights.foreground > 0.0)) {
    throw InvalidArgument("class weights must be positive");
  }
  double weight_total = 0.0;
  for (std::size_t b = 0; b < scores.size(); ++b) {
    const auto& s = scores[b];
    const auto& m = masks[b];
    if (s.channels != 2 || s.height != m.height || s.width != m.width) {
      throw InvalidArgument("score map and mask dimensions differ");
    }
    for (const T v : s.data) {
      if (!std::isfinite(static_cast<double>(v))) throw DataError("non-finite score in loss");
    }
    for (const std::uint8_t y : m.data) weight_total += y ? weights.foreground : weights.background;
  }

  LossResult<T> out;
  out.grad.reserve(scores.size());
  double total = 0.0;
  for (std::size_t b = 0; b < scores.size(); ++b) {
    const auto& s = scores[b];
    const auto& m = masks[b];
    const std::size_t n = s.plane_size();
    Tensor<T> g(2, s.height, s.width);
    const T* s0 = s.channel(0);
    const T* s1 = s.channel(1);
    T* g0 = g.channel(0);
    T* g1 = g.channel(1);
    for (std::size_t i = 0; i < n; ++i) {
      const bool fg = m.data[i] != 0;
      const double w = fg ? weights.foreground : weights.background;
      // margin of the wrong class over the right one
      const double z = fg ? static_cast<double>(s0[i]) - s1[i] : static_cast<double>(s1[i]) - s0[i];
      total += w * softplus(z);
      // p_wrong = sigmoid(z)
      const double p_wrong = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      const double d = w * p_wrong / weight_total;
      if (fg) {
        g1[i] = static_cast<T>(-d);
        g0[i] = static_cast<T>(d);
      } else {
        g0[i] = static_cast<T>(-d);
        g1[i] = static_cast<T>(d);
      }
    }
    out.grad.push_back(std::move(g));
  }
  out.loss = total / weight_total;
  return out;
}

}  // namespace lesionseg::nn
