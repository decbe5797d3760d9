#pragma once

#include <cstddef>

#include "lesionseg/error.hpp"
#include "lesionseg/image.hpp"
#include "lesionseg/rng.hpp"

namespace lesionseg {

// Image and mask of equal size. Every transform below is applied to both.
template <typename Image>
struct BasicSample {
  Image image;
  Mask mask;

  friend bool operator==(const BasicSample&, const BasicSample&) = default;
};

using Sample = BasicSample<NormalizedImage>;

struct AugmentConfig {
  double p_flip_h = 0.5;
  double p_flip_v = 0.5;
  bool rot90 = true;
};

// The transform drawn by random_augment, recorded so it can be replayed.
struct AugmentDraw {
  bool flip_h = false;
  bool flip_v = false;
  int k = 0;
};

template <typename T, std::size_t P>
Raster<T, P> flip_h(const Raster<T, P>& r) {
  Raster<T, P> out(r.width, r.height);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t y = 0; y < r.height; ++y)
      for (std::size_t x = 0; x < r.width; ++x)
        out.at(p, r.width - 1 - x, y) = r.at(p, x, y);
  return out;
}

template <typename T, std::size_t P>
Raster<T, P> flip_v(const Raster<T, P>& r) {
  Raster<T, P> out(r.width, r.height);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t y = 0; y < r.height; ++y)
      for (std::size_t x = 0; x < r.width; ++x)
        out.at(p, x, r.height - 1 - y) = r.at(p, x, y);
  return out;
}

// Counter-clockwise by 90 degrees as displayed (y axis pointing down):
// (x, y) -> (y, W - 1 - x) once per quarter turn.
template <typename T, std::size_t P>
Raster<T, P> rot90(const Raster<T, P>& r, int k) {
  if (k < 0 || k > 3) throw InvalidArgument("rot90 expects k in {0,1,2,3}");
  Raster<T, P> cur = r;
  for (int step = 0; step < k; ++step) {
    Raster<T, P> out(cur.height, cur.width);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t y = 0; y < cur.height; ++y)
        for (std::size_t x = 0; x < cur.width; ++x)
          out.at(p, y, cur.width - 1 - x) = cur.at(p, x, y);
    cur = std::move(out);
  }
  return cur;
}

template <typename Image>
void check_sample(const BasicSample<Image>& s) {
  if (!same_size(s.image, s.mask)) throw InvalidArgument("sample image and mask sizes differ");
}

template <typename Image>
BasicSample<Image> flip_h(const BasicSample<Image>& s) {
  check_sample(s);
  return {flip_h(s.image), flip_h(s.mask)};
}

template <typename Image>
BasicSample<Image> flip_v(const BasicSample<Image>& s) {
  check_sample(s);
  return {flip_v(s.image), flip_v(s.mask)};
}

template <typename Image>
BasicSample<Image> rot90(const BasicSample<Image>& s, int k) {
  check_sample(s);
  return {rot90(s.image, k), rot90(s.mask, k)};
}

// Consumes exactly three values from rng, in the order flip_h, flip_v, k.
inline AugmentDraw draw_augment(Rng& rng, const AugmentConfig& cfg) {
  if (!(cfg.p_flip_h >= 0.0 && cfg.p_flip_h <= 1.0 && cfg.p_flip_v >= 0.0 && cfg.p_flip_v <= 1.0)) {
    throw InvalidArgument("flip probabilities must lie in [0, 1]");
  }
  AugmentDraw d;
  d.flip_h = bernoulli(rng, cfg.p_flip_h);
  d.flip_v = bernoulli(rng, cfg.p_flip_v);
  const auto k = static_cast<int>(uniform_index(rng, 4));
  d.k = cfg.rot90 ? k : 0;
  return d;
}

template <typename Image>
BasicSample<Image> apply_augment(const BasicSample<Image>& s, const AugmentDraw& d) {
  BasicSample<Image> out = s;
  if (d.flip_h) out = flip_h(out);
  if (d.flip_v) out = flip_v(out);
  if (d.k != 0) out = rot90(out, d.k);
  return out;
}

template <typename Image>
BasicSample<Image> random_augment(const BasicSample<Image>& s, Rng& rng, const AugmentConfig& cfg) {
  check_sample(s);
  return apply_augment(s, draw_augment(rng, cfg));
}

}  // namespace lesionseg
