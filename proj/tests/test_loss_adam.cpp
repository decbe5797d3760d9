#include <gtest/gtest.h>

#include <cmath>

#include "lesionseg/nn/adam.hpp"
#include "lesionseg/nn/loss.hpp"
#include "lesionseg/rng.hpp"

namespace lesionseg::nn {
namespace {

Tensor<double> scores_of(std::size_t h, std::size_t w, double s0, double s1) {
  Tensor<double> t(2, h, w);
  std::fill(t.data.begin(), t.data.begin() + static_cast<long>(h * w), s0);
  std::fill(t.data.begin() + static_cast<long>(h * w), t.data.end(), s1);
  return t;
}

TEST(WeightedCe, UniformPredictionIsLn2) {
  Rng rng(1);
  Mask m(4, 3);
  for (auto& v : m.data) v = bernoulli(rng, 0.3) ? 1 : 0;
  const std::vector<Tensor<double>> s{scores_of(3, 4, 0.7, 0.7)};
  const std::vector<Mask> masks{m};
  for (const ClassWeights w : {ClassWeights{1, 1}, ClassWeights{0.6, 2.3}}) {
    EXPECT_NEAR(weighted_ce_loss<double>(s, masks, w).loss, -std::log(0.5), 1e-15);
  }
}

TEST(WeightedCe, ConfidentCorrectLimit) {
  const std::vector<Tensor<float>> s{tensor_cast<float>(scores_of(2, 2, 0.0, 40.0))};
  const std::vector<Mask> masks{Mask(2, 2, 1)};
  const auto r = weighted_ce_loss<float>(s, masks, {1.0, 1.0});
  EXPECT_GE(r.loss, 0.0);
  EXPECT_LT(r.loss, 1e-12);
}

TEST(WeightedCe, SinglePixelGradient) {
  const std::vector<Tensor<double>> s{scores_of(1, 1, 0.0, 0.0)};
  const std::vector<Mask> masks{Mask(1, 1, 1)};
  const auto r = weighted_ce_loss<double>(s, masks, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(r.grad[0].data[0], 0.5);   // dL/ds0
  EXPECT_DOUBLE_EQ(r.grad[0].data[1], -0.5);  // dL/ds1
}

TEST(WeightedCe, WeightedMeanMatchesDirectSum) {
  Rng rng(2);
  std::vector<Tensor<double>> s;
  std::vector<Mask> masks;
  for (int b = 0; b < 3; ++b) {
    Tensor<double> t(2, 3, 5);
    for (auto& v : t.data) v = 3.0 * standard_normal(rng);
    s.push_back(t);
    Mask m(5, 3);
    for (auto& v : m.data) v = bernoulli(rng, 0.4) ? 1 : 0;
    masks.push_back(m);
  }
  const ClassWeights w{0.64, 2.3};
  double num = 0.0, den = 0.0;
  for (int b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < 15; ++i) {
      const double s0 = s[b].data[i], s1 = s[b].data[15 + i];
      const double p1 = std::exp(s1) / (std::exp(s0) + std::exp(s1));
      const bool fg = masks[b].data[i] != 0;
      const double wy = fg ? w.foreground : w.background;
      num += wy * -std::log(fg ? p1 : 1.0 - p1);
      den += wy;
    }
  EXPECT_NEAR(weighted_ce_loss<double>(s, masks, w).loss, num / den, 1e-12);
}

TEST(WeightedCe, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  std::vector<Tensor<double>> s{Tensor<double>(2, 2, 3)};
  for (auto& v : s[0].data) v = 2.0 * standard_normal(rng);
  std::vector<Mask> masks{Mask(3, 2, std::vector<std::uint8_t>{1, 0, 0, 1, 1, 0})};
  const ClassWeights w{0.8, 1.9};
  const auto r = weighted_ce_loss<double>(s, masks, w);
  for (std::size_t i = 0; i < s[0].data.size(); ++i) {
    auto up = s, down = s;
    up[0].data[i] += 1e-6;
    down[0].data[i] -= 1e-6;
    const double fd = (weighted_ce_loss<double>(up, masks, w).loss - weighted_ce_loss<double>(down, masks, w).loss) / 2e-6;
    EXPECT_NEAR(r.grad[0].data[i], fd, 1e-8);
  }
}

TEST(WeightedCe, NonNegativeAndRejectsNonFinite) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    std::vector<Tensor<float>> s{Tensor<float>(2, 2, 2)};
    for (auto& v : s[0].data) v = static_cast<float>(20.0 * standard_normal(rng));
    std::vector<Mask> masks{Mask(2, 2)};
    for (auto& v : masks[0].data) v = bernoulli(rng, 0.5) ? 1 : 0;
    EXPECT_GE(weighted_ce_loss<float>(s, masks, {1.0, 2.0}).loss, 0.0);
  }
  std::vector<Tensor<float>> bad{Tensor<float>(2, 1, 1)};
  bad[0].data[1] = INFINITY;
  const std::vector<Mask> masks{Mask(1, 1, 0)};
  EXPECT_THROW(weighted_ce_loss<float>(bad, masks, {}), DataError);
  const std::vector<Mask> wrong{Mask(2, 1, 0)};
  EXPECT_THROW(weighted_ce_loss<float>(std::vector<Tensor<float>>{Tensor<float>(2, 1, 1)}, wrong, {}), InvalidArgument);
}

TEST(ClassWeights, Examples) {
  const auto half = class_weights_from_proportion(0.5);
  EXPECT_DOUBLE_EQ(half.background, 1.0);
  EXPECT_DOUBLE_EQ(half.foreground, 1.0);
  const auto w = class_weights_from_proportion(0.214);
  EXPECT_NEAR(w.foreground, 0.5 / 0.214, 1e-12);
  EXPECT_NEAR(w.foreground, 2.336, 5e-4);
  EXPECT_NEAR(w.background, 0.636, 5e-4);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double p = 0.001 + 0.998 * uniform01(rng);
    const auto w = class_weights_from_proportion(p);
    EXPECT_NEAR(p * w.foreground, 0.5, 1e-12);
    EXPECT_NEAR((1 - p) * w.background, 0.5, 1e-12);
  }
  EXPECT_THROW(class_weights_from_proportion(0.0), InvalidArgument);
  EXPECT_THROW(class_weights_from_proportion(1.0), InvalidArgument);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<double> p{1.0, -2.0, 3.5};
  const std::vector<double> g(3, 0.0);
  AdamState<double> st(3);
  for (int i = 0; i < 5; ++i) adam_step<double>(p, g, st, {});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.5}));
  EXPECT_EQ(st.t, 5u);
}

TEST(Adam, FirstStepIsSignStep) {
  std::vector<double> p{0.0};
  const std::vector<double> g{4.0};
  AdamState<double> st(1);
  AdamConfig cfg;
  cfg.learning_rate = 1e-4;
  adam_step<double>(p, g, st, cfg);
  // m_hat = 4, v_hat = 16: delta = -lr * 4 / (4 + eps)
  EXPECT_NEAR(p[0], -1e-4 * 4.0 / (4.0 + 1e-8), 1e-18);
  EXPECT_NEAR(p[0], -1e-4 * (1 - 1e-8 / 4), 1e-15);
}

TEST(Adam, TwoStepsMatchScalarTrace) {
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = -0.37;
  double theta = 0.25, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
  }
  std::vector<double> p{0.25};
  const std::vector<double> grad{g};
  AdamState<double> st(1);
  for (int t = 0; t < 2; ++t) adam_step<double>(p, grad, st, {lr, b1, b2, eps});
  EXPECT_NEAR(p[0], theta, 1e-12);
}

TEST(Adam, RejectsNonFiniteAndLengthMismatch) {
  std::vector<float> p{1.0f, 2.0f};
  AdamState<float> st(2);
  EXPECT_THROW(adam_step<float>(p, std::vector<float>{0.0f, NAN}, st, {}), DataError);
  EXPECT_EQ(st.t, 0u);
  EXPECT_EQ(p, (std::vector<float>{1.0f, 2.0f}));
  EXPECT_THROW(adam_step<float>(p, std::vector<float>{0.0f}, st, {}), InvalidArgument);
}

TEST(Adam, UpdatesStayFinite) {
  Rng rng(6);
  std::vector<float> p(50, 0.0f), g(50);
  AdamState<float> st(50);
  for (int s = 0; s < 200; ++s) {
    for (auto& x : g) x = static_cast<float>(1e3 * standard_normal(rng));
    adam_step<float>(p, g, st, {});
  }
  for (const float x : p) EXPECT_TRUE(std::isfinite(x));
}

TEST(Plateau, DecreasingLossesKeepRate) {
  std::vector<double> losses;
  double lr = 1e-4;
  for (int e = 0; e < 30; ++e) {
    losses.push_back(1.0 / (1.0 + e));
    lr = plateau_update(losses, lr, {});
    EXPECT_EQ(lr, 1e-4);
  }
}

TEST(Plateau, ConstantLossesCutAfterPatience) {
  const PlateauConfig cfg{5, 0.5, 1e-6, 1e-4};
  std::vector<double> losses;
  double lr = 1e-4;
  for (int e = 0; e < 5; ++e) {
    losses.push_back(0.3);
    lr = plateau_update(losses, lr, cfg);
    EXPECT_EQ(lr, 1e-4);
  }
  losses.push_back(0.3);  // patience + 1 epochs
  EXPECT_DOUBLE_EQ(plateau_update(losses, lr, cfg), 5e-5);
}

TEST(Plateau, CounterResetsAfterCut) {
  const PlateauConfig cfg{2, 0.5, 1e-6, 1e-4};
  std::vector<double> losses;
  double lr = 1.0;
  std::vector<double> seen;
  for (int e = 0; e < 7; ++e) {
    losses.push_back(1.0);
    lr = plateau_update(losses, lr, cfg);
    seen.push_back(lr);
  }
  // cuts at epochs 3, 5 and 7
  EXPECT_EQ(seen, (std::vector<double>{1.0, 1.0, 0.5, 0.5, 0.25, 0.25, 0.125}));
}

TEST(Plateau, SmallImprovementDoesNotCount) {
  const PlateauConfig cfg{1, 0.5, 1e-6, 1e-4};
  const std::vector<double> losses{1.0, 1.0 - 1e-6};
  EXPECT_EQ(plateau_update(losses, 1.0, cfg), 0.5);
}

TEST(Plateau, NeverBelowMinimum) {
  const PlateauConfig cfg{1, 0.5, 1e-6, 1e-4};
  std::vector<double> losses;
  double lr = 4e-6;
  for (int e = 0; e < 20; ++e) {
    losses.push_back(2.0);
    lr = plateau_update(losses, lr, cfg);
    EXPECT_GE(lr, 1e-6);
  }
  EXPECT_EQ(lr, 1e-6);
  EXPECT_THROW(plateau_update(losses, 0.0, cfg), InvalidArgument);
}

}  // namespace
}  // namespace lesionseg::nn
