#include <gtest/gtest.h>

#include <cmath>

#include "lesionseg/nn/gradcheck.hpp"
#include "lesionseg/nn/unet.hpp"
#include "reference_unet.hpp"

namespace lesionseg::nn {
namespace {

Tensor<double> random_input(Rng& rng, std::size_t c, std::size_t h, std::size_t w) {
  Tensor<double> t(c, h, w);
  for (auto& v : t.data) v = standard_normal(rng);
  return t;
}

TEST(UNetLayout, ParamCountDepthOneBaseOne) {
  // enc 3->1 (27+1), 1->1 (9+1); bottleneck 1->2 (18+2), 2->2 (36+2);
  // up 2->1 (8+1); dec 2->1 (18+1), 1->1 (9+1); final 1->2 (2+2)
  EXPECT_EQ(unet_param_count({1, 1, 3, 2}), 28u + 10 + 20 + 38 + 9 + 19 + 10 + 4);
}

TEST(UNetLayout, OffsetsAreContiguous) {
  const UNetLayout layout(UNetConfig{3, 4, 3, 2});
  std::size_t pos = 0;
  for (const auto& l : layout.layers) {
    EXPECT_EQ(l.weight_offset, pos);
    pos += l.weight_count();
    EXPECT_EQ(l.bias_offset, pos);
    pos += l.out_channels;
  }
  EXPECT_EQ(pos, layout.param_count);
  EXPECT_EQ(layout.layers.size(), 2 * 3 + 2 + 3 * 3 + 1u);
}

TEST(UNetInit, DeterministicZeroBiasBounded) {
  const UNetConfig cfg{2, 3, 3, 2};
  const auto a = unet_init<float>(cfg, 17), b = unet_init<float>(cfg, 17), c = unet_init<float>(cfg, 18);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  const UNetLayout layout(cfg);
  for (const auto& l : layout.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.fan_in()));
    for (std::size_t i = 0; i < l.weight_count(); ++i) EXPECT_LE(std::abs(a[l.weight_offset + i]), bound);
    for (std::size_t i = 0; i < l.out_channels; ++i) EXPECT_EQ(a[l.bias_offset + i], 0.0f);
  }
}

TEST(UNetForward, ZeroParamsGiveZeroScores) {
  const UNetConfig cfg{2, 2, 3, 2};
  const std::vector<float> params(unet_param_count(cfg), 0.0f);
  Rng rng(1);
  const auto in = tensor_cast<float>(random_input(rng, 3, 8, 8));
  for (const float v : unet_forward<float>(params, cfg, in).data) EXPECT_EQ(v, 0.0f);
}

TEST(UNetForward, OutputShape) {
  Rng rng(2);
  for (const auto& cfg : {UNetConfig{1, 1, 3, 2}, UNetConfig{2, 2, 3, 2}, UNetConfig{3, 2, 3, 2}}) {
    const auto params = unet_init<float>(cfg, 1);
    for (const std::size_t h : {8u, 16u}) {
      const auto out = unet_forward<float>(params, cfg, tensor_cast<float>(random_input(rng, 3, h, 24)));
      EXPECT_EQ(out.channels, 2u);
      EXPECT_EQ(out.height, h);
      EXPECT_EQ(out.width, 24u);
    }
  }
}

TEST(UNetForward, MatchesScalarReference) {
  Rng rng(3);
  for (const auto& cfg : {UNetConfig{1, 1, 3, 2}, UNetConfig{2, 2, 3, 2}, UNetConfig{3, 2, 3, 2}}) {
    auto params = unet_init<double>(cfg, 4);
    for (auto& p : params) p += 0.05 * standard_normal(rng);  // non-zero biases too
    const auto in = random_input(rng, 3, 8, 16);
    const auto out = unet_forward<double>(params, cfg, in);
    testing::RefMap ref_in(3, 8, 16);
    ref_in.v = in.data;
    const auto ref = testing::ref_unet(params, cfg.depth, cfg.base_channels, ref_in);
    ASSERT_EQ(ref.v.size(), out.data.size());
    for (std::size_t i = 0; i < out.data.size(); ++i) EXPECT_NEAR(out.data[i], ref.v[i], 1e-10);
  }
}

TEST(UNetForward, HandTracedIdentityKernels) {
  // depth 1, base 1. Encoder keeps the red channel, pools it; the bottleneck
  // copies it to both channels; the up-conv replicates channel 0 into each
  // 2x2 block; the decoder adds skip + upsampled; the head emits (-v, v).
  const UNetConfig cfg{1, 1, 3, 2};
  const UNetLayout layout(cfg);
  std::vector<double> p(layout.param_count, 0.0);
  auto w = [&](std::size_t layer) { return p.data() + layout.layers[layer].weight_offset; };
  w(0)[4] = 1.0;                         // enc conv1: red centre tap
  w(1)[4] = 1.0;                         // enc conv2: identity
  w(2)[4] = 1.0;                         // bottleneck conv1 -> ch0
  w(2)[9 + 4] = 1.0;                     //                  -> ch1
  w(3)[4] = 1.0;                         // bottleneck conv2: identity on both
  w(3)[(1 * 2 + 1) * 9 + 4] = 1.0;
  for (int k = 0; k < 4; ++k) w(4)[k] = 1.0;  // up-conv from ch0 only
  w(5)[4] = 1.0;                         // dec conv1: skip + up
  w(5)[9 + 4] = 1.0;
  w(6)[4] = 1.0;                         // dec conv2: identity
  w(7)[0] = -1.0;                        // head
  w(7)[1] = 1.0;

  Tensor<double> in(3, 4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      in.at(0, y, x) = static_cast<double>(1 + y * 4 + x);
      in.at(1, y, x) = 100.0;
      in.at(2, y, x) = -100.0;
    }
  // Red is 1..16 row-major, so each 2x2 block max is its bottom-right value.
  const double block_max[2][2] = {{6, 8}, {14, 16}};
  const auto out = unet_forward<double>(p, cfg, in);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      const double v = in.at(0, y, x) + block_max[y / 2][x / 2];
      EXPECT_DOUBLE_EQ(out.at(1, y, x), v);
      EXPECT_DOUBLE_EQ(out.at(0, y, x), -v);
    }
}

TEST(UNetForward, Errors) {
  const UNetConfig cfg{2, 2, 3, 2};
  const auto params = unet_init<float>(cfg, 1);
  EXPECT_THROW(unet_forward<float>(params, cfg, Tensor<float>(3, 6, 8)), InvalidArgument);
  EXPECT_THROW(unet_forward<float>(params, cfg, Tensor<float>(2, 8, 8)), InvalidArgument);
  const std::vector<float> short_params(params.begin(), params.end() - 1);
  EXPECT_THROW(unet_forward<float>(short_params, cfg, Tensor<float>(3, 8, 8)), InvalidArgument);
  EXPECT_THROW(validate(UNetConfig{0, 2, 3, 2}), InvalidArgument);
}

TEST(UNetBackward, ZeroUpstreamGivesZeroGradient) {
  const UNetConfig cfg{2, 2, 3, 2};
  const auto params = unet_init<double>(cfg, 5);
  Rng rng(5);
  ForwardCache<double> cache;
  unet_forward<double>(params, cfg, random_input(rng, 3, 8, 8), &cache);
  std::vector<double> grad(params.size(), 0.0);
  unet_backward<double>(params, cfg, cache, Tensor<double>(2, 8, 8), grad);
  for (const double g : grad) EXPECT_EQ(g, 0.0);
}

TEST(UNetBackward, FinalBiasGradientIsUpstreamSum) {
  const UNetConfig cfg{2, 2, 3, 2};
  const auto params = unet_init<double>(cfg, 6);
  Rng rng(6);
  ForwardCache<double> cache;
  unet_forward<double>(params, cfg, random_input(rng, 3, 8, 8), &cache);
  const auto upstream = random_input(rng, 2, 8, 8);
  std::vector<double> grad(params.size(), 0.0);
  unet_backward<double>(params, cfg, cache, upstream, grad);
  const auto& head = UNetLayout(cfg).layers.back();
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 64; ++i) sum += upstream.data[c * 64 + i];
    EXPECT_NEAR(grad[head.bias_offset + c], sum, 1e-12);
  }
}

TEST(UNetBackward, RejectsMismatchedCache) {
  const UNetConfig cfg{2, 2, 3, 2}, other{1, 2, 3, 2};
  const auto params = unet_init<double>(cfg, 7);
  ForwardCache<double> cache;
  unet_forward<double>(params, cfg, Tensor<double>(3, 8, 8), &cache);
  std::vector<double> grad(unet_param_count(other), 0.0);
  EXPECT_THROW(unet_backward<double>(unet_init<double>(other, 7), other, cache, Tensor<double>(2, 8, 8), grad),
               InvalidArgument);
  std::vector<double> g2(params.size(), 0.0);
  EXPECT_THROW(unet_backward<double>(params, cfg, cache, Tensor<double>(2, 16, 16), g2), InvalidArgument);
  EXPECT_THROW(unet_backward<double>(params, cfg, ForwardCache<double>{}, Tensor<double>(2, 8, 8), g2),
               InvalidArgument);
}

const UNetConfig kTiny{2, 2, 3, 2};

TEST(GradientCheck, FullTinyNet) {
  const auto r = gradient_check(kTiny, 1);
  EXPECT_LT(r.max_rel_error, 1e-5) << "worst parameter " << r.worst_index;
  EXPECT_EQ(r.param_count, unet_param_count(kTiny));
}

TEST(GradientCheck, HoldsAcrossSeedsAndBatchSizes) {
  for (const std::uint64_t seed : {3u, 4u}) {
    for (const std::size_t batch : {1u, 3u}) {
      GradCheckOptions opt;
      opt.batch = batch;
      const auto r = gradient_check(kTiny, seed, opt);
      EXPECT_LT(r.max_rel_error, 1e-5) << "seed " << seed << " batch " << batch << " worst " << r.worst_index;
      EXPECT_LT(r.reduced_steps, r.param_count);
    }
  }
}

TEST(GradientCheck, LinearNetIsExact) {
  GradCheckOptions opt;
  opt.activation = Activation::identity;
  opt.loss = CheckLoss::linear_probe;
  const auto r = gradient_check(kTiny, 2, opt);
  EXPECT_LT(r.max_rel_error, 1e-8) << "worst parameter " << r.worst_index;
}

TEST(GradientCheck, DetectsCorruptedEntry) {
  GradCheckOptions opt;
  opt.corrupt_index = 17;
  const auto r = gradient_check(kTiny, 1, opt);
  EXPECT_GT(r.max_rel_error, 1e-3);
  EXPECT_EQ(r.worst_index, 17u);
}

}  // namespace
}  // namespace lesionseg::nn
