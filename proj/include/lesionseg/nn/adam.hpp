#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lesionseg/error.hpp"

namespace lesionseg::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::size_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
};

// One bias-corrected Adam update in place. Rejects non-finite gradients
// before touching any state.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InvalidArgument("adam_step: parameter, gradient and state lengths differ");
  }
  for (const T g : grads) {
    if (!std::isfinite(static_cast<double>(g))) throw DataError("non-finite gradient");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T lr = static_cast<T>(cfg.learning_rate);
  const T eps = static_cast<T>(cfg.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T m_hat = state.m[i] / c1;
    const T v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

struct PlateauConfig {
  std::size_t patience = 5;
  double factor = 0.5;
  double min_lr = 1e-6;
  double rel_improvement = 1e-4;
};

// Learning rate for the next epoch given the full loss history so far.
// Replays the patience counter from the start, so the rule is a pure
// function of the history: an epoch improves when its loss is at most
// best * (1 - rel_improvement); after `patience` consecutive non-improving
// epochs the rate is cut and the counter restarts.
inline double plateau_update(std::span<const double> losses, double lr, const PlateauConfig& cfg) {
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (losses.empty()) return lr;
  double best = losses[0];
  std::size_t bad = 0;
  bool cut_now = false;
  for (std::size_t i = 1; i < losses.size(); ++i) {
    cut_now = false;
    if (losses[i] <= best * (1.0 - cfg.rel_improvement)) {
      best = losses[i];
      bad = 0;
    } else if (++bad >= cfg.patience) {
      bad = 0;
      cut_now = true;
    }
  }
  return cut_now ? std::max(lr * cfg.factor, cfg.min_lr) : lr;
}

}  // namespace lesionseg::nn
