#pragma once

// Dense kernels for the U-Net building blocks. Each backward function
// accumulates into its gradient outputs, so callers zero them first.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lesionseg/nn/tensor.hpp"

namespace lesionseg::nn {

// 3x3 convolution, zero padding 1, stride 1. Weight layout [out][in][ky][kx].
template <typename T>
void conv3x3_forward(const Tensor<T>& in, const T* weight, const T* bias, std::size_t out_channels,
                     Tensor<T>& out) {
  const std::size_t H = in.height, W = in.width, C = in.channels;
  out = Tensor<T>(out_channels, H, W);
  for (std::size_t o = 0; o < out_channels; ++o) {
    T* dst = out.channel(o);
    std::fill(dst, dst + H * W, bias[o]);
    for (std::size_t i = 0; i < C; ++i) {
      const T* src = in.channel(i);
      const T* w = weight + (o * C + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const std::size_t y0 = dy < 0 ? 1 : 0;
        const std::size_t y1 = dy > 0 ? H - 1 : H;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const T wk = w[ky * 3 + kx];
          const std::size_t x0 = dx < 0 ? 1 : 0;
          const std::size_t x1 = dx > 0 ? W - 1 : W;
          for (std::size_t y = y0; y < y1; ++y) {
            T* orow = dst + y * W;
            const T* irow = src + static_cast<std::ptrdiff_t>(y * W) + dy * static_cast<std::ptrdiff_t>(W) + dx;
            for (std::size_t x = x0; x < x1; ++x) orow[x] += wk * irow[x];
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3_backward(const Tensor<T>& in, const Tensor<T>& grad_out, const T* weight,
                      Tensor<T>* grad_in, T* grad_weight, T* grad_bias) {
  const std::size_t H = in.height, W = in.width, C = in.channels;
  const std::size_t O = grad_out.channels;
  if (grad_in) *grad_in = Tensor<T>(C, H, W);
  for (std::size_t o = 0; o < O; ++o) {
    const T* g = grad_out.channel(o);
    T bsum = 0;
    for (std::size_t p = 0; p < H * W; ++p) bsum += g[p];
    grad_bias[o] += bsum;
    for (std::size_t i = 0; i < C; ++i) {
      const T* src = in.channel(i);
      const T* w = weight + (o * C + i) * 9;
      T* gw = grad_weight + (o * C + i) * 9;
      T* gin = grad_in ? grad_in->channel(i) : nullptr;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const std::size_t y0 = dy < 0 ? 1 : 0;
        const std::size_t y1 = dy > 0 ? H - 1 : H;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const std::size_t x0 = dx < 0 ? 1 : 0;
          const std::size_t x1 = dx > 0 ? W - 1 : W;
          const T wk = w[ky * 3 + kx];
          // Eight independent partial sums keep the reduction order fixed
          // while letting the compiler vectorize.
          T acc[8] = {};
          T tail = 0;
          for (std::size_t y = y0; y < y1; ++y) {
            const T* grow = g + y * W;
            const T* irow = src + static_cast<std::ptrdiff_t>(y * W) + dy * static_cast<std::ptrdiff_t>(W) + dx;
            std::size_t x = x0;
            for (; x + 8 <= x1; x += 8) {
              for (int l = 0; l < 8; ++l) acc[l] += grow[x + l] * irow[x + l];
            }
            for (; x < x1; ++x) tail += grow[x] * irow[x];
            if (gin) {
              T* drow = gin + static_cast<std::ptrdiff_t>(y * W) + dy * static_cast<std::ptrdiff_t>(W) + dx;
              for (std::size_t xx = x0; xx < x1; ++xx) drow[xx] += wk * grow[xx];
            }
          }
          T sum = tail;
          for (int l = 0; l < 8; ++l) sum += acc[l];
          gw[ky * 3 + kx] += sum;
        }
      }
    }
  }
}

// 1x1 convolution. Weight layout [out][in].
template <typename T>
void conv1x1_forward(const Tensor<T>& in, const T* weight, const T* bias, std::size_t out_channels,
                     Tensor<T>& out) {
  const std::size_t N = in.plane_size(), C = in.channels;
  out = Tensor<T>(out_channels, in.height, in.width);
  for (std::size_t o = 0; o < out_channels; ++o) {
    T* dst = out.channel(o);
    std::fill(dst, dst + N, bias[o]);
    for (std::size_t i = 0; i < C; ++i) {
      const T wk = weight[o * C + i];
      const T* src = in.channel(i);
      for (std::size_t p = 0; p < N; ++p) dst[p] += wk * src[p];
    }
  }
}

template <typename T>
void conv1x1_backward(const Tensor<T>& in, const Tensor<T>& grad_out, const T* weight,
                      Tensor<T>* grad_in, T* grad_weight, T* grad_bias) {
  const std::size_t N = in.plane_size(), C = in.channels, O = grad_out.channels;
  if (grad_in) *grad_in = Tensor<T>(C, in.height, in.width);
  for (std::size_t o = 0; o < O; ++o) {
    const T* g = grad_out.channel(o);
    T bsum = 0;
    for (std::size_t p = 0; p < N; ++p) bsum += g[p];
    grad_bias[o] += bsum;
    for (std::size_t i = 0; i < C; ++i) {
      const T* src = in.channel(i);
      T sum = 0;
      for (std::size_t p = 0; p < N; ++p) sum += g[p] * src[p];
      grad_weight[o * C + i] += sum;
      if (grad_in) {
        const T wk = weight[o * C + i];
        T* gin = grad_in->channel(i);
        for (std::size_t p = 0; p < N; ++p) gin[p] += wk * g[p];
      }
    }
  }
}

// 2x2 transposed convolution, stride 2. Weight layout [out][in][dy][dx].
template <typename T>
void upconv2x2_forward(const Tensor<T>& in, const T* weight, const T* bias, std::size_t out_channels,
                       Tensor<T>& out) {
  const std::size_t H = in.height, W = in.width, C = in.channels;
  const std::size_t OW = 2 * W;
  out = Tensor<T>(out_channels, 2 * H, OW);
  for (std::size_t o = 0; o < out_channels; ++o) {
    T* dst = out.channel(o);
    std::fill(dst, dst + 4 * H * W, bias[o]);
    for (std::size_t i = 0; i < C; ++i) {
      const T* src = in.channel(i);
      const T* w = weight + (o * C + i) * 4;
      for (std::size_t y = 0; y < H; ++y) {
        const T* irow = src + y * W;
        T* r0 = dst + (2 * y) * OW;
        T* r1 = r0 + OW;
        for (std::size_t x = 0; x < W; ++x) {
          const T v = irow[x];
          r0[2 * x] += w[0] * v;
          r0[2 * x + 1] += w[1] * v;
          r1[2 * x] += w[2] * v;
          r1[2 * x + 1] += w[3] * v;
        }
      }
    }
  }
}

template <typename T>
void upconv2x2_backward(const Tensor<T>& in, const Tensor<T>& grad_out, const T* weight,
                        Tensor<T>* grad_in, T* grad_weight, T* grad_bias) {
  const std::size_t H = in.height, W = in.width, C = in.channels, O = grad_out.channels;
  const std::size_t OW = 2 * W;
  if (grad_in) *grad_in = Tensor<T>(C, H, W);
  for (std::size_t o = 0; o < O; ++o) {
    const T* g = grad_out.channel(o);
    T bsum = 0;
    for (std::size_t p = 0; p < 4 * H * W; ++p) bsum += g[p];
    grad_bias[o] += bsum;
    for (std::size_t i = 0; i < C; ++i) {
      const T* src = in.channel(i);
      const T* w = weight + (o * C + i) * 4;
      T* gw = grad_weight + (o * C + i) * 4;
      T* gin = grad_in ? grad_in->channel(i) : nullptr;
      T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (std::size_t y = 0; y < H; ++y) {
        const T* irow = src + y * W;
        const T* g0 = g + (2 * y) * OW;
        const T* g1 = g0 + OW;
        for (std::size_t x = 0; x < W; ++x) {
          const T v = irow[x];
          s0 += g0[2 * x] * v;
          s1 += g0[2 * x + 1] * v;
          s2 += g1[2 * x] * v;
          s3 += g1[2 * x + 1] * v;
          if (gin) {
            gin[y * W + x] += w[0] * g0[2 * x] + w[1] * g0[2 * x + 1] + w[2] * g1[2 * x] +
                              w[3] * g1[2 * x + 1];
          }
        }
      }
      gw[0] += s0;
      gw[1] += s1;
      gw[2] += s2;
      gw[3] += s3;
    }
  }
}

// 2x2 max pool, stride 2. `argmax` receives the flat input offset of each
// winner; ties go to the first element in row-major window order.
template <typename T>
void maxpool2x2_forward(const Tensor<T>& in, Tensor<T>& out, std::vector<std::uint32_t>& argmax) {
  const std::size_t H = in.height / 2, W = in.width / 2, IW = in.width;
  out = Tensor<T>(in.channels, H, W);
  argmax.assign(out.data.size(), 0);
  for (std::size_t c = 0; c < in.channels; ++c) {
    const std::size_t base = c * in.plane_size();
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t cand[4] = {base + (2 * y) * IW + 2 * x, base + (2 * y) * IW + 2 * x + 1,
                                     base + (2 * y + 1) * IW + 2 * x,
                                     base + (2 * y + 1) * IW + 2 * x + 1};
        std::size_t best = cand[0];
        for (int k = 1; k < 4; ++k) {
          if (in.data[cand[k]] > in.data[best]) best = cand[k];
        }
        const std::size_t o = (c * H + y) * W + x;
        out.data[o] = in.data[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

template <typename T>
void maxpool2x2_backward(const Tensor<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                         Tensor<T>& grad_in) {
  for (std::size_t o = 0; o < grad_out.data.size(); ++o) grad_in.data[argmax[o]] += grad_out.data[o];
}

enum class Activation { relu, identity };

template <typename T>
void activation_forward(Activation act, const Tensor<T>& pre, Tensor<T>& out) {
  out = pre;
  if (act == Activation::relu) {
    for (T& v : out.data) v = v > T(0) ? v : T(0);
  }
}

// The ReLU derivative at exactly 0 is taken as 0.
template <typename T>
void activation_backward(Activation act, const Tensor<T>& pre, Tensor<T>& grad) {
  if (act == Activation::relu) {
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
      if (!(pre.data[i] > T(0))) grad.data[i] = T(0);
    }
  }
}

// Channel-wise concatenation [a, b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& joined, std::size_t first_channels, Tensor<T>& a, Tensor<T>& b) {
  const std::size_t n = joined.plane_size();
  a = Tensor<T>(first_channels, joined.height, joined.width);
  b = Tensor<T>(joined.channels - first_channels, joined.height, joined.width);
  const auto split = joined.data.begin() + static_cast<std::ptrdiff_t>(first_channels * n);
  std::copy(joined.data.begin(), split, a.data.begin());
  std::copy(split, joined.data.end(), b.data.begin());
}

}  // namespace lesionseg::nn
