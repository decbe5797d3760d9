#pragma once

// Deterministic stand-in for a dermoscopy dataset: skin-toned images with one
// darker filled ellipse each, the ellipse interior being the ground truth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "lesionseg/error.hpp"
#include "lesionseg/image.hpp"
#include "lesionseg/rng.hpp"

namespace lesionseg {

struct SynthConfig {
  std::size_t n_images = 1;
  std::size_t size = 64;
  std::uint64_t seed = 0;
  double noise_std = 0.05;
  // Semi-axis range as fractions of the image side.
  double axis_min = 0.1;
  double axis_max = 0.4;
};

// Average skin tone the backgrounds are drawn around.
inline constexpr std::array<double, 3> kSkinTone{0.708, 0.582, 0.536};

struct Ellipse {
  double cx = 0.0, cy = 0.0;  // pixel units
  double a = 1.0, b = 1.0;    // semi-axes, pixel units
  double angle = 0.0;         // radians

  // Pixel (x, y) is tested at its centre (x + 0.5, y + 0.5).
  bool contains(std::size_t x, std::size_t y) const {
    const double dx = static_cast<double>(x) + 0.5 - cx;
    const double dy = static_cast<double>(y) + 0.5 - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (dx * c + dy * s) / a;
    const double v = (-dx * s + dy * c) / b;
    return u * u + v * v <= 1.0;
  }
};

struct SynthSample {
  RgbImage image;
  Mask mask;
  Ellipse ellipse;
};

inline void validate(const SynthConfig& cfg) {
  if (cfg.n_images < 1) throw InvalidArgument("synth needs at least one image");
  if (cfg.size < 1) throw InvalidArgument("synth image size must be >= 1");
  if (!(cfg.noise_std >= 0.0)) throw InvalidArgument("noise std must be >= 0");
  if (!(cfg.axis_min > 0.0 && cfg.axis_min <= cfg.axis_max)) {
    throw InvalidArgument("ellipse axis range must satisfy 0 < min <= max");
  }
}

inline float quantize_unit(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::floor(c * 255.0 + 0.5)) / 255.0f;
}

inline SynthSample synth_sample(const SynthConfig& cfg, std::size_t index) {
  Rng rng(derive_seed(cfg.seed, index));
  const double side = static_cast<double>(cfg.size);

  SynthSample s;
  auto& e = s.ellipse;
  // Centre from a Gaussian around the middle, truncated to the central half.
  do {
    e.cx = side * (0.5 + 0.12 * standard_normal(rng));
  } while (e.cx < 0.25 * side || e.cx > 0.75 * side);
  do {
    e.cy = side * (0.5 + 0.12 * standard_normal(rng));
  } while (e.cy < 0.25 * side || e.cy > 0.75 * side);
  e.a = side * uniform(rng, cfg.axis_min, cfg.axis_max);
  e.b = side * uniform(rng, cfg.axis_min, cfg.axis_max);
  e.angle = uniform(rng, 0.0, std::numbers::pi);

  std::array<double, 3> skin{};
  for (std::size_t c = 0; c < 3; ++c) skin[c] = kSkinTone[c] + uniform(rng, -0.04, 0.04);
  const std::array<double, 3> lesion{skin[0] * uniform(rng, 0.50, 0.70),
                                     skin[1] * uniform(rng, 0.40, 0.60),
                                     skin[2] * uniform(rng, 0.40, 0.60)};

  s.image = RgbImage(cfg.size, cfg.size);
  s.mask = Mask(cfg.size, cfg.size);
  for (std::size_t y = 0; y < cfg.size; ++y) {
    for (std::size_t x = 0; x < cfg.size; ++x) {
      const bool inside = e.contains(x, y);
      s.mask.at(0, x, y) = inside ? 1 : 0;
      const auto& base = inside ? lesion : skin;
      for (std::size_t c = 0; c < 3; ++c) {
        s.image.at(c, x, y) = quantize_unit(base[c] + cfg.noise_std * standard_normal(rng));
      }
    }
  }
  return s;
}

inline std::vector<SynthSample> synth_dataset(const SynthConfig& cfg) {
  validate(cfg);
  std::vector<SynthSample> out;
  out.reserve(cfg.n_images);
  for (std::size_t i = 0; i < cfg.n_images; ++i) out.push_back(synth_sample(cfg, i));
  return out;
}

}  // namespace lesionseg
