#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lesionseg/error.hpp"
#include "lesionseg/image.hpp"

namespace lesionseg {

struct ChannelStats {
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> std{1.0f, 1.0f, 1.0f};

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

// Per-pixel lesion frequency in [0,1].
using PriorMap = Plane;

// Fraction of foreground pixels.
inline double mask_proportion(const Mask& mask) {
  check_dimensions(mask);
  std::size_t count = 0;
  for (const std::uint8_t v : mask.data) count += v ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(mask.pixels());
}

// Pooled over every pixel of every image: mean and population std per channel.
inline ChannelStats dataset_stats(std::span<const RgbImage> images) {
  if (images.empty()) throw InvalidArgument("dataset_stats needs at least one image");
  std::array<double, 3> sum{};
  std::size_t count = 0;
  for (const auto& img : images) {
    check_dimensions(img);
    for (std::size_t c = 0; c < 3; ++c) {
      const float* p = img.plane(c);
      for (std::size_t i = 0; i < img.pixels(); ++i) sum[c] += p[i];
    }
    count += img.pixels();
  }
  std::array<double, 3> mean{};
  for (std::size_t c = 0; c < 3; ++c) mean[c] = sum[c] / static_cast<double>(count);

  std::array<double, 3> sq{};
  for (const auto& img : images) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float* p = img.plane(c);
      for (std::size_t i = 0; i < img.pixels(); ++i) {
        const double d = p[i] - mean[c];
        sq[c] += d * d;
      }
    }
  }
  ChannelStats out;
  for (std::size_t c = 0; c < 3; ++c) {
    out.mean[c] = static_cast<float>(mean[c]);
    out.std[c] = static_cast<float>(std::sqrt(sq[c] / static_cast<double>(count)));
  }
  return out;
}

// Nearest-neighbour source index for destination index i.
inline std::size_t nearest_source(std::size_t i, std::size_t src, std::size_t dst) {
  const auto s = static_cast<std::size_t>(
      std::floor((static_cast<double>(i) + 0.5) * static_cast<double>(src) /
                 static_cast<double>(dst)));
  return s < src ? s : src - 1;
}

inline Mask resample_nearest(const Mask& m, std::size_t width, std::size_t height) {
  Mask out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = nearest_source(y, m.height, height);
    for (std::size_t x = 0; x < width; ++x) {
      out.at(0, x, y) = m.at(0, nearest_source(x, m.width, width), sy);
    }
  }
  return out;
}

inline PriorMap spatial_prior(std::span<const Mask> masks, std::size_t width, std::size_t height) {
  if (masks.empty()) throw InvalidArgument("spatial_prior needs at least one mask");
  if (width == 0 || height == 0) throw InvalidArgument("prior map dimensions must be >= 1");
  std::vector<std::size_t> hits(width * height, 0);
  for (const auto& m : masks) {
    check_dimensions(m);
    const Mask r = (m.width == width && m.height == height) ? m : resample_nearest(m, width, height);
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += r.data[i] ? 1 : 0;
  }
  PriorMap prior(width, height);
  const double n = static_cast<double>(masks.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    prior.data[i] = static_cast<float>(static_cast<double>(hits[i]) / n);
  }
  return prior;
}

// (in - mean) / std per channel; with center_only the division is skipped.
inline NormalizedImage normalize_image(const RgbImage& img, const ChannelStats& stats,
                                       bool center_only = false) {
  check_dimensions(img);
  if (!center_only) {
    for (const float s : stats.std) {
      if (!(s > 0.0f)) throw InvalidArgument("normalization needs every channel std > 0");
    }
  }
  NormalizedImage out(img.width, img.height);
  for (std::size_t c = 0; c < 3; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    const float inv = center_only ? 1.0f : 1.0f / stats.std[c];
    for (std::size_t i = 0; i < img.pixels(); ++i) dst[i] = (src[i] - stats.mean[c]) * inv;
  }
  return out;
}

inline RgbImage denormalize_image(const NormalizedImage& img, const ChannelStats& stats,
                                  bool center_only = false) {
  RgbImage out(img.width, img.height);
  for (std::size_t c = 0; c < 3; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    const float scale = center_only ? 1.0f : stats.std[c];
    for (std::size_t i = 0; i < img.pixels(); ++i) dst[i] = src[i] * scale + stats.mean[c];
  }
  return out;
}

}  // namespace lesionseg
