#pragma once

#include <cstddef>
#include <vector>

#include "lesionseg/error.hpp"

namespace lesionseg::nn {

// Channel-major, row-major feature map.
template <typename T>
struct Tensor {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t c, std::size_t h, std::size_t w, T fill = T{})
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  std::size_t plane_size() const { return height * width; }
  T* channel(std::size_t c) { return data.data() + c * plane_size(); }
  const T* channel(std::size_t c) const { return data.data() + c * plane_size(); }
  T& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <typename T, typename U>
Tensor<T> tensor_cast(const Tensor<U>& src) {
  Tensor<T> out(src.channels, src.height, src.width);
  for (std::size_t i = 0; i < src.data.size(); ++i) out.data[i] = static_cast<T>(src.data[i]);
  return out;
}

}  // namespace lesionseg::nn
