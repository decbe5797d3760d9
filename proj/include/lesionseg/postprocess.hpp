#pragma once

// Score-map post-processing: softmax probabilities, Gaussian smoothing of
// both score planes, the score difference s1 - s0, an Otsu threshold on its
// histogram and the final mask.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "lesionseg/error.hpp"
#include "lesionseg/image.hpp"

namespace lesionseg {

// Plane 0 = p0 (background), plane 1 = p1 (lesion).
using ProbabilityMap = Raster<float, 2>;

enum class PostprocessMode { naive, otsu };

struct PostprocessConfig {
  double sigma = 5.0;
  std::size_t bins = 256;
  PostprocessMode mode = PostprocessMode::otsu;
};

struct OtsuResult {
  double threshold = 0.0;
  double between_class_variance = 0.0;
  bool degenerate = false;
  std::size_t cut = 0;  // number of bins in the lower class
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline ProbabilityMap softmax2(const ScoreMap& s) {
  check_dimensions(s);
  ProbabilityMap p(s.width, s.height);
  const std::size_t n = s.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const double p1 = sigmoid(static_cast<double>(s.data[n + i]) - static_cast<double>(s.data[i]));
    p.data[n + i] = static_cast<float>(p1);
    p.data[i] = static_cast<float>(1.0 - p1);
  }
  return p;
}

// Normalized Gaussian on [-r, r] with r = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur, horizontal then vertical, edge-replicated borders.
inline Plane gaussian_blur(const Plane& in, double sigma) {
  check_dimensions(in);
  const auto kernel = gaussian_kernel(sigma);
  const auto r = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const auto W = static_cast<std::ptrdiff_t>(in.width);
  const auto H = static_cast<std::ptrdiff_t>(in.height);
  auto clamp = [](std::ptrdiff_t v, std::ptrdiff_t n) { return std::clamp<std::ptrdiff_t>(v, 0, n - 1); };

  std::vector<double> tmp(in.data.size());
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -r; i <= r; ++i) {
        acc += kernel[static_cast<std::size_t>(i + r)] * in.data[static_cast<std::size_t>(y * W + clamp(x + i, W))];
      }
      tmp[static_cast<std::size_t>(y * W + x)] = acc;
    }
  }
  Plane out(in.width, in.height);
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t j = -r; j <= r; ++j) {
        acc += kernel[static_cast<std::size_t>(j + r)] * tmp[static_cast<std::size_t>(clamp(y + j, H) * W + x)];
      }
      out.data[static_cast<std::size_t>(y * W + x)] = static_cast<float>(acc);
    }
  }
  return out;
}

inline ScoreMap gaussian_blur(const ScoreMap& s, double sigma) {
  ScoreMap out(s.width, s.height);
  for (std::size_t p = 0; p < 2; ++p) {
    Plane plane(s.width, s.height,
                std::vector<float>(s.plane(p), s.plane(p) + s.pixels()));
    const Plane blurred = gaussian_blur(plane, sigma);
    std::copy(blurred.data.begin(), blurred.data.end(), out.plane(p));
  }
  return out;
}

inline Plane score_diff(const ScoreMap& s) {
  check_dimensions(s);
  Plane d(s.width, s.height);
  const std::size_t n = s.pixels();
  for (std::size_t i = 0; i < n; ++i) d.data[i] = s.data[n + i] - s.data[i];
  return d;
}

// Equal-width histogram over [lo, hi]; hi falls into the last bin.
struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> counts;

  double width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  double edge(std::size_t k) const { return lo + static_cast<double>(k) * width(); }

  std::size_t bin_of(double v) const {
    const double f = (v - lo) / (hi - lo) * static_cast<double>(counts.size());
    const auto b = static_cast<std::size_t>(std::max(0.0, std::floor(f)));
    return std::min(b, counts.size() - 1);
  }
};

template <typename V>
Histogram make_histogram(std::span<const V> values, std::size_t bins) {
  if (values.empty()) throw InvalidArgument("histogram of an empty collection");
  if (bins < 2) throw InvalidArgument("histogram needs at least 2 bins");
  Histogram h;
  h.counts.assign(bins, 0);
  h.lo = std::numeric_limits<double>::infinity();
  h.hi = -std::numeric_limits<double>::infinity();
  for (const V v : values) {
    const double d = static_cast<double>(v);
    if (!std::isfinite(d)) throw InvalidArgument("histogram input must be finite");
    h.lo = std::min(h.lo, d);
    h.hi = std::max(h.hi, d);
  }
  if (h.hi == h.lo) {
    h.counts[0] = values.size();
    return h;
  }
  for (const V v : values) ++h.counts[h.bin_of(static_cast<double>(v))];
  return h;
}

// Between-class variance of the cut, scaled by N^2 and measured in bin units:
// (n1 S0 - n0 S1)^2 / (n0 n1), where S are sums of bin indices. Integer
// class statistics make the score identical for any route that produces
// the same counts.
inline long double otsu_cut_score(std::uint64_t n0, std::uint64_t s0, std::uint64_t n1,
                                  std::uint64_t s1) {
  if (n0 == 0 || n1 == 0) return 0.0L;
  const __int128 diff = static_cast<__int128>(n1) * static_cast<__int128>(s0) -
                        static_cast<__int128>(n0) * static_cast<__int128>(s1);
  const long double d = static_cast<long double>(diff);
  return d * d / (static_cast<long double>(n0) * static_cast<long double>(n1));
}

// Otsu's method over a `bins`-bin histogram. Cut k puts bins [0, k) in the
// lower class and reports the threshold as the upper edge of bin k-1. Ties
// go to the lowest cut.
template <typename V>
OtsuResult otsu_threshold(std::span<const V> values, std::size_t bins = 256) {
  const Histogram h = make_histogram(values, bins);
  OtsuResult r;
  const std::size_t nonempty = static_cast<std::size_t>(
      std::count_if(h.counts.begin(), h.counts.end(), [](std::uint64_t c) { return c > 0; }));
  if (h.hi == h.lo || nonempty < 2) {
    r.degenerate = true;
    return r;
  }
  std::uint64_t total_n = 0, total_s = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    total_n += h.counts[k];
    total_s += h.counts[k] * k;
  }
  std::uint64_t n0 = 0, s0 = 0;
  long double best = -1.0L;
  std::size_t best_cut = 1;
  for (std::size_t cut = 1; cut < bins; ++cut) {
    n0 += h.counts[cut - 1];
    s0 += h.counts[cut - 1] * (cut - 1);
    const long double score = otsu_cut_score(n0, s0, total_n - n0, total_s - s0);
    if (score > best) {
      best = score;
      best_cut = cut;
    }
  }
  const double n = static_cast<double>(total_n);
  const double w = h.width();
  r.cut = best_cut;
  r.threshold = h.edge(best_cut);
  r.between_class_variance = static_cast<double>(best) / (n * n) * w * w;
  return r;
}

// 1 where delta > threshold.
inline Mask extract_mask(const Plane& delta, double threshold) {
  check_dimensions(delta);
  Mask m(delta.width, delta.height);
  for (std::size_t i = 0; i < delta.data.size(); ++i) {
    m.data[i] = static_cast<double>(delta.data[i]) > threshold ? 1 : 0;
  }
  return m;
}

struct PostprocessResult {
  Mask mask;
  OtsuResult otsu;
  double threshold_used = 0.0;
};

inline PostprocessResult postprocess_pipeline(const ScoreMap& s, const PostprocessConfig& cfg) {
  check_dimensions(s);
  if (!all_finite(s)) throw DataError("score map contains non-finite values");
  if (cfg.mode == PostprocessMode::naive) {
    PostprocessResult out;
    out.mask = extract_mask(score_diff(s), 0.0);
    return out;
  }
  const Plane delta = score_diff(gaussian_blur(s, cfg.sigma));
  PostprocessResult out;
  out.otsu = otsu_threshold<float>(delta.data, cfg.bins);
  out.threshold_used = out.otsu.degenerate ? 0.0 : out.otsu.threshold;
  out.mask = extract_mask(delta, out.threshold_used);
  return out;
}

}  // namespace lesionseg
