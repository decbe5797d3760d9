#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "lesionseg/augment.hpp"
#include "lesionseg/checkpoint.hpp"
#include "lesionseg/error.hpp"
#include "lesionseg/metrics.hpp"
#include "lesionseg/nn/adam.hpp"
#include "lesionseg/nn/loss.hpp"
#include "lesionseg/nn/unet.hpp"
#include "lesionseg/postprocess.hpp"
#include "lesionseg/rng.hpp"
#include "lesionseg/stats.hpp"

namespace lesionseg::nn {

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  std::size_t plateau_patience = 5;
  double plateau_factor = 0.5;
  double min_lr = 1e-6;
  ClassWeights class_weights;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  // 1 is the reference path. More threads split each batch's per-sample
  // forward/backward; the gradient reduction order stays fixed.
  std::size_t threads = 1;

  AdamConfig adam(double lr) const { return {lr, beta1, beta2, epsilon}; }
  PlateauConfig plateau() const { return {plateau_patience, plateau_factor, min_lr, 1e-4}; }
};

inline void validate(const TrainConfig& t) {
  if (!(t.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(t.plateau_factor > 0.0 && t.plateau_factor < 1.0)) {
    throw InvalidArgument("plateau factor must lie in (0, 1)");
  }
  if (!(t.class_weights.background > 0.0 && t.class_weights.foreground > 0.0)) {
    throw InvalidArgument("class weights must be positive");
  }
  if (t.batch_size == 0) throw InvalidArgument("batch size must be >= 1");
  if (t.threads == 0) throw InvalidArgument("thread count must be >= 1");
}

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_jaccard = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

inline std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,loss,val_jaccard,lr\n";
  char line[128];
  for (const auto& r : h.epochs) {
    std::snprintf(line, sizeof line, "%zu,%.6g,%.6g,%.6g\n", r.epoch, r.loss, r.val_jaccard, r.lr);
    out += line;
  }
  return out;
}

struct TrainResult {
  Checkpoint checkpoint;
  TrainHistory history;
};

// Samples [0, n - n_val) train, the trailing n_val validate.
inline std::size_t validation_count(std::size_t n, double val_frac) {
  if (!(val_frac > 0.0 && val_frac < 1.0)) throw InvalidArgument("validation fraction must lie in (0, 1)");
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_frac));
  if (n_val == 0 || n_val >= n) {
    throw InvalidArgument("dataset of " + std::to_string(n) + " samples leaves an empty training or validation split");
  }
  return n_val;
}

inline Tensor<float> to_tensor(const NormalizedImage& img) {
  Tensor<float> t(3, img.height, img.width);
  t.data = img.data;
  return t;
}

inline ScoreMap to_score_map(const Tensor<float>& t) {
  if (t.channels != 2) throw InvalidArgument("score tensor must have 2 channels");
  return ScoreMap(t.width, t.height, t.data);
}

inline Mask naive_mask(const ScoreMap& s) { return extract_mask(score_diff(s), 0.0); }

inline ScoreMap predict_scores(std::span<const float> params, const UNetConfig& cfg,
                               const NormalizedImage& img) {
  return to_score_map(unet_forward<float>(params, cfg, to_tensor(img)));
}

// Mean Jaccard of the naive (s1 > s0) masks.
inline double mean_validation_jaccard(std::span<const float> params, const UNetConfig& cfg,
                                      std::span<const Sample> samples) {
  double sum = 0.0;
  for (const auto& s : samples) sum += jaccard(naive_mask(predict_scores(params, cfg, s.image)), s.mask);
  return samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
}

namespace detail {

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t t = std::min(threads, n);
  pool.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Loss and summed parameter gradient of one mini-batch. Per-sample gradients
// are reduced in batch order, so the result does not depend on `threads`.
inline double batch_gradient(std::span<const float> params, const UNetConfig& cfg,
                             std::span<const Sample> batch, const ClassWeights& weights,
                             std::size_t threads, std::vector<float>& grad) {
  const std::size_t b = batch.size();
  std::vector<ForwardCache<float>> caches(b);
  std::vector<Tensor<float>> scores(b);
  std::vector<Mask> masks(b);
  detail::parallel_for(b, threads, [&](std::size_t i) {
    scores[i] = unet_forward<float>(params, cfg, to_tensor(batch[i].image), &caches[i]);
  });
  for (std::size_t i = 0; i < b; ++i) masks[i] = batch[i].mask;
  const auto loss = weighted_ce_loss<float>(scores, masks, weights);

  std::vector<std::vector<float>> per_sample(b, std::vector<float>(params.size(), 0.0f));
  detail::parallel_for(b, threads, [&](std::size_t i) {
    unet_backward<float>(params, cfg, caches[i], loss.grad[i], per_sample[i]);
    caches[i] = ForwardCache<float>{};
  });
  grad.assign(params.size(), 0.0f);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += per_sample[i][k];
  }
  return loss.loss;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training with augmentation, weighted cross entropy, Adam and
// plateau decay. Validation uses the trailing samples (see validation_count).
inline TrainResult train(std::span<const Sample> samples, double val_frac, const TrainConfig& tcfg,
                         const UNetConfig& ucfg, const ChannelStats& normalization,
                         const EpochCallback& on_epoch = {}) {
  validate(tcfg);
  validate(ucfg);
  if (samples.empty()) throw InvalidArgument("training needs at least one sample");
  const std::size_t n_val = validation_count(samples.size(), val_frac);
  const std::size_t n_train = samples.size() - n_val;
  const std::size_t m = ucfg.size_multiple();
  for (const auto& s : samples) {
    check_sample(s);
    if (s.image.width % m != 0 || s.image.height % m != 0) {
      throw DataError("sample size " + std::to_string(s.image.width) + "x" +
                      std::to_string(s.image.height) + " is not divisible by 2^depth = " +
                      std::to_string(m));
    }
  }
  const auto train_set = samples.first(n_train);
  const auto val_set = samples.subspan(n_train);

  TrainResult result;
  result.checkpoint.config = ucfg;
  result.checkpoint.normalization = normalization;
  auto& params = result.checkpoint.params;
  params = unet_init<float>(ucfg, tcfg.seed);

  AdamState<float> adam(params.size());
  Rng shuffle_rng(derive_seed(tcfg.seed, 1));
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> losses;
  double lr = tcfg.learning_rate;
  std::vector<float> grad;
  std::vector<Sample> batch;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    const std::uint64_t epoch_seed = derive_seed(tcfg.seed, 1000 + epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_train; start += tcfg.batch_size) {
      const std::size_t end = std::min(n_train, start + tcfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        Rng aug_rng(derive_seed(epoch_seed, idx));
        batch.push_back(random_augment(train_set[idx], aug_rng, tcfg.augment));
      }
      loss_sum += batch_gradient(params, ucfg, batch, tcfg.class_weights, tcfg.threads, grad);
      ++batches;
      adam_step<float>(params, grad, adam, tcfg.adam(lr));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(batches);
    rec.val_jaccard = mean_validation_jaccard(params, ucfg, val_set);
    rec.lr = lr;
    result.history.epochs.push_back(rec);
    losses.push_back(rec.loss);
    if (on_epoch) on_epoch(rec);
    lr = plateau_update(losses, lr, tcfg.plateau());
  }
  return result;
}

}  // namespace lesionseg::nn
