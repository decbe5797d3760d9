#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesionseg/image.hpp"
#include "lesionseg/imgio.hpp"
#include "lesionseg/rng.hpp"

namespace lesionseg::testing {

inline Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

inline Bytes concat(Bytes a, const Bytes& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline Mask random_mask(Rng& rng, std::size_t w, std::size_t h, double p = 0.5) {
  Mask m(w, h);
  for (auto& v : m.data) v = bernoulli(rng, p) ? 1 : 0;
  return m;
}

// Values on the k/255 grid, so netpbm round trips are exact.
inline RgbImage random_byte_image(Rng& rng, std::size_t w, std::size_t h) {
  RgbImage img(w, h);
  for (auto& v : img.data) v = static_cast<float>(uniform_index(rng, 256)) / 255.0f;
  return img;
}

template <std::size_t P>
Raster<float, P> random_plane(Rng& rng, std::size_t w, std::size_t h, double scale = 1.0) {
  Raster<float, P> r(w, h);
  for (auto& v : r.data) v = static_cast<float>(scale * standard_normal(rng));
  return r;
}

}  // namespace lesionseg::testing
