#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lesionseg/error.hpp"

namespace lesionseg {

// Offset of pixel (x, y) in plane p of a plane-major, row-major raster.
constexpr std::size_t plane_index(std::size_t p, std::size_t x, std::size_t y,
                                  std::size_t width, std::size_t height) {
  return p * width * height + y * width + x;
}

// Raster of `planes` float planes. Backing store for every image-like type.
template <typename T, std::size_t Planes>
struct Raster {
  static constexpr std::size_t kPlanes = Planes;

  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(std::size_t w, std::size_t h, T fill = T{})
      : width(w), height(h), data(Planes * w * h, fill) {}
  Raster(std::size_t w, std::size_t h, std::vector<T> values)
      : width(w), height(h), data(std::move(values)) {
    if (data.size() != Planes * w * h) {
      throw InvalidArgument("raster data length does not match dimensions");
    }
  }

  std::size_t pixels() const { return width * height; }

  T& at(std::size_t p, std::size_t x, std::size_t y) {
    return data[plane_index(p, x, y, width, height)];
  }
  const T& at(std::size_t p, std::size_t x, std::size_t y) const {
    return data[plane_index(p, x, y, width, height)];
  }

  T* plane(std::size_t p) { return data.data() + p * pixels(); }
  const T* plane(std::size_t p) const { return data.data() + p * pixels(); }

  friend bool operator==(const Raster&, const Raster&) = default;
};

// RGB in [0,1], plane-major (all R, all G, all B).
using RgbImage = Raster<float, 3>;
// Single channel in [0,1].
using GrayImage = Raster<float, 1>;
// Binary mask, 0 = skin, 1 = lesion.
using Mask = Raster<std::uint8_t, 1>;
// Plane 0 holds background scores s0, plane 1 foreground scores s1.
using ScoreMap = Raster<float, 2>;
// Single unbounded float plane (score differences, prior maps, filters).
using Plane = Raster<float, 1>;
// Normalized RGB with unbounded values.
using NormalizedImage = Raster<float, 3>;

template <typename T, std::size_t P>
void check_dimensions(const Raster<T, P>& r) {
  if (r.width == 0 || r.height == 0) {
    throw InvalidArgument("raster dimensions must be at least 1x1");
  }
  if (r.data.size() != P * r.width * r.height) {
    throw InvalidArgument("raster data length does not match dimensions");
  }
}

template <typename T, std::size_t P>
bool all_finite(const Raster<T, P>& r) {
  for (const T v : r.data) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template <typename A, std::size_t PA, typename B, std::size_t PB>
bool same_size(const Raster<A, PA>& a, const Raster<B, PB>& b) {
  return a.width == b.width && a.height == b.height;
}

}  // namespace lesionseg
