#include <gtest/gtest.h>

#include <algorithm>

#include "lesionseg/metrics.hpp"
#include "test_util.hpp"

namespace lesionseg {
namespace {

Mask row(std::vector<std::uint8_t> v) {
  const std::size_t w = v.size();
  return Mask(w, 1, std::move(v));
}

TEST(Jaccard, Examples) {
  EXPECT_EQ(jaccard(row({1, 1, 0}), row({1, 1, 0})), 1.0);
  EXPECT_EQ(jaccard(row({1, 0, 0}), row({0, 1, 0})), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(row({1, 1, 0}), row({0, 1, 1})), 1.0 / 3.0);
  EXPECT_EQ(jaccard(row({0, 0}), row({0, 0})), 1.0);
}

TEST(Jaccard, SymmetricAndBounded) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Mask a = testing::random_mask(rng, 9, 7, uniform01(rng));
    const Mask b = testing::random_mask(rng, 9, 7, uniform01(rng));
    const double j = jaccard(a, b);
    EXPECT_EQ(j, jaccard(b, a));
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
    EXPECT_EQ(jaccard(a, a), 1.0);
  }
}

TEST(Jaccard, RejectsSizeMismatch) {
  EXPECT_THROW(jaccard(Mask(2, 2), Mask(2, 3)), InvalidArgument);
}

TEST(ThresholdedJaccard, Examples) {
  EXPECT_EQ(thresholded_jaccard(0.6), 0.0);
  EXPECT_EQ(thresholded_jaccard(0.65), 0.65);
  EXPECT_EQ(thresholded_jaccard(0.75), 0.75);
  EXPECT_EQ(thresholded_jaccard(0.3, 0.2), 0.3);
  EXPECT_THROW(thresholded_jaccard(1.5), InvalidArgument);
  EXPECT_THROW(thresholded_jaccard(-0.1), InvalidArgument);
}

// Build a pair with the requested Jaccard on a 10-pixel row.
EvalPair pair_with(std::size_t inter, std::size_t uni, std::string id) {
  std::vector<std::uint8_t> a(10, 0), b(10, 0);
  for (std::size_t i = 0; i < uni; ++i) a[i] = 1;
  for (std::size_t i = 0; i < inter; ++i) b[i] = 1;
  return {row(a), row(b), std::move(id)};
}

TEST(Evaluate, MeansOfRawAndThresholded) {
  const std::vector<EvalPair> pairs{pair_with(6, 10, "b"), pair_with(8, 10, "a")};
  const auto r = evaluate_dataset(pairs);
  EXPECT_DOUBLE_EQ(r.mean_raw, 0.7);
  EXPECT_DOUBLE_EQ(r.mean_thresholded, 0.4);
  ASSERT_EQ(r.per_image.size(), 2u);
  EXPECT_EQ(r.per_image[0].id, "a");
  EXPECT_DOUBLE_EQ(r.per_image[0].thresholded, 0.8);
  EXPECT_EQ(r.per_image[1].thresholded, 0.0);
  EXPECT_EQ(r.cutoff, kDefaultJaccardCutoff);
}

TEST(Evaluate, PermutationInvariant) {
  Rng rng(2);
  std::vector<EvalPair> pairs;
  for (int i = 0; i < 20; ++i) {
    pairs.push_back({testing::random_mask(rng, 6, 6, 0.4), testing::random_mask(rng, 6, 6, 0.4),
                     "id" + std::to_string(i)});
  }
  const auto a = evaluate_dataset(pairs, 0.3);
  shuffle(pairs, rng);
  const auto b = evaluate_dataset(pairs, 0.3);
  EXPECT_EQ(a.mean_raw, b.mean_raw);
  EXPECT_EQ(a.mean_thresholded, b.mean_thresholded);
  EXPECT_LE(a.mean_thresholded, a.mean_raw);
}

TEST(Evaluate, Errors) {
  EXPECT_THROW(evaluate_dataset({}), InvalidArgument);
  const std::vector<EvalPair> bad{{Mask(2, 2), Mask(3, 2), "odd"}};
  try {
    evaluate_dataset(bad);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("odd"), std::string::npos);
  }
}

}  // namespace
}  // namespace lesionseg
