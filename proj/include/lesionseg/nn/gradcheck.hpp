#pragma once

// Central-difference check of unet_backward in double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lesionseg/nn/loss.hpp"
#include "lesionseg/nn/unet.hpp"
#include "lesionseg/rng.hpp"

namespace lesionseg::nn {

enum class CheckLoss {
  cross_entropy,
  // sum of scores times fixed random coefficients; linear in the scores
  linear_probe,
};

struct GradCheckOptions {
  std::size_t size = 8;
  std::size_t batch = 2;
  Activation activation = Activation::relu;
  CheckLoss loss = CheckLoss::cross_entropy;
  ClassWeights weights{0.7, 1.6};
  // Scales one analytic gradient entry by (1 + corrupt_scale) before the
  // comparison. Used to confirm the harness notices a wrong gradient.
  std::optional<std::size_t> corrupt_index;
  double corrupt_scale = 0.01;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t param_count = 0;
  // Parameters whose step had to shrink to stay inside one linear region.
  std::size_t reduced_steps = 0;
};

namespace detail {

// Which piece of the piecewise-linear network a forward pass landed in:
// ReLU on/off bits and max-pool winners.
template <typename T>
std::vector<std::uint32_t> region_signature(const ForwardCache<T>& c) {
  std::vector<std::uint32_t> sig;
  auto signs = [&](const typename ForwardCache<T>::Block& b) {
    if (c.activation != Activation::relu) return;
    for (const T v : b.pre1.data) sig.push_back(v > T(0));
    for (const T v : b.pre2.data) sig.push_back(v > T(0));
  };
  for (const auto& b : c.encoder) signs(b);
  signs(c.bottleneck);
  for (const auto& b : c.decoder) signs(b);
  for (const auto& a : c.pool_argmax) sig.insert(sig.end(), a.begin(), a.end());
  return sig;
}

// Weighted-mean cross entropy, value only, in extended precision.
inline long double weighted_ce_value(std::span<const Tensor<long double>> scores, std::span<const Mask> masks,
                                     const ClassWeights& w) {
  long double total = 0.0L, weight_total = 0.0L;
  for (std::size_t b = 0; b < scores.size(); ++b) {
    const std::size_t n = masks[b].pixels();
    for (std::size_t i = 0; i < n; ++i) {
      const bool fg = masks[b].data[i] != 0;
      const long double wi = fg ? w.foreground : w.background;
      const long double z = fg ? scores[b].data[i] - scores[b].data[n + i] : scores[b].data[n + i] - scores[b].data[i];
      total += wi * (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
      weight_total += wi;
    }
  }
  return total / weight_total;
}

}  // namespace detail

inline GradCheckResult gradient_check(const UNetConfig& cfg, std::uint64_t seed,
                                      const GradCheckOptions& opt = {}) {
  std::vector<double> params = unet_init<double>(cfg, seed);
  const UNetLayout layout(cfg);
  Rng rng(derive_seed(seed, 7));
  // Non-zero biases so every bias path carries signal.
  for (const auto& layer : layout.layers) {
    for (std::size_t i = 0; i < layer.out_channels; ++i) {
      params[layer.bias_offset + i] = uniform(rng, -0.1, 0.1);
    }
  }

  std::vector<Tensor<double>> inputs;
  std::vector<Mask> masks;
  std::vector<Tensor<double>> probes;
  for (std::size_t b = 0; b < opt.batch; ++b) {
    Tensor<double> x(cfg.in_channels, opt.size, opt.size);
    for (double& v : x.data) v = standard_normal(rng);
    inputs.push_back(std::move(x));
    Mask m(opt.size, opt.size);
    for (auto& v : m.data) v = bernoulli(rng, 0.4) ? 1 : 0;
    masks.push_back(std::move(m));
    Tensor<double> r(cfg.out_channels, opt.size, opt.size);
    for (double& v : r.data) v = uniform(rng, -1.0, 1.0);
    probes.push_back(std::move(r));
  }

  std::vector<double> analytic(params.size(), 0.0);
  {
    std::vector<ForwardCache<double>> caches(opt.batch);
    std::vector<Tensor<double>> scores;
    for (std::size_t b = 0; b < opt.batch; ++b) {
      scores.push_back(unet_forward<double>(params, cfg, inputs[b], &caches[b], opt.activation));
    }
    std::vector<Tensor<double>> upstream = probes;
    if (opt.loss == CheckLoss::cross_entropy) upstream = weighted_ce_loss<double>(scores, masks, opt.weights).grad;
    for (std::size_t b = 0; b < opt.batch; ++b) unet_backward<double>(params, cfg, caches[b], upstream[b], analytic);
  }
  if (opt.corrupt_index) analytic.at(*opt.corrupt_index) *= 1.0 + opt.corrupt_scale;

  // The finite-difference reference runs in extended precision so that
  // cancellation does not swamp small gradients.
  std::vector<long double> xparams(params.begin(), params.end());
  std::vector<Tensor<long double>> xinputs, xprobes;
  for (std::size_t b = 0; b < opt.batch; ++b) {
    xinputs.push_back(tensor_cast<long double>(inputs[b]));
    xprobes.push_back(tensor_cast<long double>(probes[b]));
  }
  auto objective = [&](std::vector<std::uint32_t>& region) {
    region.clear();
    std::vector<Tensor<long double>> scores;
    for (std::size_t b = 0; b < opt.batch; ++b) {
      ForwardCache<long double> cache;
      scores.push_back(unet_forward<long double>(xparams, cfg, xinputs[b], &cache, opt.activation));
      const auto sig = detail::region_signature(cache);
      region.insert(region.end(), sig.begin(), sig.end());
    }
    if (opt.loss == CheckLoss::cross_entropy) return detail::weighted_ce_value(scores, masks, opt.weights);
    long double value = 0.0L;
    for (std::size_t b = 0; b < opt.batch; ++b) {
      for (std::size_t i = 0; i < scores[b].data.size(); ++i) value += xprobes[b].data[i] * scores[b].data[i];
    }
    return value;
  };
  std::vector<std::uint32_t> base_region, region;
  objective(base_region);

  GradCheckResult r;
  r.param_count = params.size();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const long double theta = xparams[k];
    long double h = 1e-3L * std::max(1.0L, std::abs(theta));
    // Central difference at step `step`; false if a probe left theta's region.
    auto central = [&](long double step, long double& out) {
      xparams[k] = theta + step;
      const long double up = objective(region);
      bool same = region == base_region;
      xparams[k] = theta - step;
      const long double down = objective(region);
      same = same && region == base_region;
      xparams[k] = theta;
      out = (up - down) / (2.0L * step);
      return same;
    };
    // A step that crosses a ReLU or pooling kink does not measure the
    // derivative at theta, so shrink it until every probe stays in theta's
    // region. Richardson extrapolation over h and h/2 cancels the h^2 term.
    long double coarse = 0.0L, fine = 0.0L;
    for (int attempt = 0; attempt < 6; ++attempt) {
      const bool same = central(h, coarse) && central(0.5L * h, fine);
      if (same || attempt == 5) break;
      if (attempt == 0) ++r.reduced_steps;
      h *= 0.1L;
    }
    const double numeric = static_cast<double>((4.0L * fine - coarse) / 3.0L);
    const double err = std::abs(analytic[k] - numeric) /
                       std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = k;
    }
  }
  return r;
}

}  // namespace lesionseg::nn
