#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "actdet/error.hpp"
#include "actdet/imbalance.hpp"
#include "support/agot_fixture.hpp"

namespace actdet {
namespace {

// Partial geometric sum 1 + b + ... + b^(n-1), added term by term.
double series_weight(std::int64_t n, double beta) {
  long double sum = 0, term = 1;
  for (std::int64_t i = 0; i < n; ++i) {
    sum += term;
    term *= beta;
  }
  return static_cast<double>(sum);
}

ClassWeights weights_for(std::vector<ClassStats> counts, ImbalanceParams p = {},
                         WeightDirection d = WeightDirection::kAsPrinted) {
  return effective_number_weights(counts, p, d);
}

TEST(ImbalanceParams, Validation) {
  EXPECT_NO_THROW(ImbalanceParams(2.0, 0.0));
  EXPECT_THROW(ImbalanceParams(0.0, 0.5), Error);
  EXPECT_THROW(ImbalanceParams(-1.0, 0.5), Error);
  EXPECT_THROW(ImbalanceParams(2.0, 1.0), Error);
  EXPECT_THROW(ImbalanceParams(2.0, -0.1), Error);
  EXPECT_THROW(ImbalanceParams(INFINITY, 0.5), Error);
}

TEST(FocalWeight, Values) {
  EXPECT_EQ(focal_weight(1.0, 2.0), 0.0);
  EXPECT_EQ(focal_weight(0.0, 2.0), 1.0);
  EXPECT_EQ(focal_weight(0.5, 2.0), 0.25);
  EXPECT_NEAR(focal_weight(0.3, 1.5), std::pow(0.7, 1.5), 1e-15);
  EXPECT_THROW(focal_weight(1.1, 2.0), Error);
  EXPECT_THROW(focal_weight(-0.1, 2.0), Error);
  EXPECT_THROW(focal_weight(0.5, 0.0), Error);
}

TEST(FocalWeight, DecreasesInP) {
  double prev = 2.0;
  for (int i = 0; i <= 100; ++i) {
    const double w = focal_weight(i / 100.0, 2.0);
    EXPECT_LT(w, prev);
    prev = w;
  }
}

TEST(EffectiveNumber, SmallCounts) {
  EXPECT_EQ(effective_number_weight(0, 0.7), 0.0);
  EXPECT_EQ(effective_number_weight(1, 0.7), 1.0);
  EXPECT_NEAR(effective_number_weight(2, 0.7), 1.7, 1e-12);
  EXPECT_NEAR(effective_number_weight(3, 0.7), 2.19, 1e-12);
  EXPECT_EQ(effective_number_weight(5, 0.0), 1.0);
  EXPECT_THROW(effective_number_weight(-1, 0.7), Error);
}

TEST(EffectiveNumber, MatchesTermwiseSeries) {
  for (const double beta : {0.0, 0.1, 0.5, 0.7, 0.9, 0.99, 0.999}) {
    for (std::int64_t n : {1, 2, 3, 7, 10, 50, 838, 7187}) {
      const double expect = series_weight(n, beta);
      EXPECT_NEAR(effective_number_weight(n, beta), expect, 1e-12 * expect) << beta << " " << n;
      EXPECT_NEAR(effective_number_weight(n, beta, WeightDirection::kInverted), 1.0 / expect,
                  1e-12 / expect);
    }
  }
}

TEST(EffectiveNumber, MonotoneAndBounded) {
  const double limit = 1.0 / (1.0 - 0.7);
  double prev = 0.0;
  for (std::int64_t n = 1; n <= 200; ++n) {
    const double w = effective_number_weight(n, 0.7);
    EXPECT_GE(w, prev);
    EXPECT_LE(w, limit);
    prev = w;
  }
  EXPECT_NEAR(effective_number_weight(838, 0.7), limit, 1e-12);
}

TEST(ClassWeights, SortedLookupAndErrors) {
  const auto w = weights_for({{4, 3, 2}, {1, 2, 1}, {9, 1, 0}});
  ASSERT_EQ(w.entries.size(), 3u);
  EXPECT_EQ(w.entries[0].class_id, 1);
  EXPECT_EQ(w.entries[2].class_id, 9);
  EXPECT_EQ(w.at(1).w2, 1.0);
  EXPECT_NEAR(w.at(4).w2, 1.7, 1e-12);
  EXPECT_EQ(w.at(9).w2, 0.0);
  EXPECT_THROW(w.at(5), Error);
  EXPECT_THROW(weights_for({{1, 1, 1}, {1, 2, 2}}), Error);
  EXPECT_THROW(weights_for({{1, 1, -1}}), Error);
}

TEST(ClassWeights, AgotTopClassesSaturate) {
  const auto fx = testing::agot_24_fixture();
  const auto stats = dataset_stats(reconstruct_clips(fx.frames));
  const auto w = weights_from_stats(stats, ImbalanceParams(2.0, 0.7));
  ASSERT_EQ(w.entries.size(), 24u);
  for (std::size_t i = 0; i < w.entries.size(); ++i) {
    EXPECT_EQ(w.entries[i].n_frames, testing::agot_top24()[i].frames);
    EXPECT_NEAR(w.entries[i].w2, 10.0 / 3.0, 1e-9);
  }
  const auto inv = weights_from_stats(stats, ImbalanceParams(2.0, 0.7), WeightDirection::kInverted);
  for (const auto& e : inv.entries) EXPECT_NEAR(e.w2, 0.3, 1e-9);
}

TEST(CombinedWeight, ProductOfFactors) {
  const auto w = weights_for({{0, 1, 2}});
  EXPECT_NEAR(combined_weight(0.5, 0, w), 0.25 * 1.7, 1e-15);
  EXPECT_EQ(combined_weight(1.0, 0, w), 0.0);
  EXPECT_THROW(combined_weight(0.5, 3, w), Error);
}

TEST(WeightedFocalCe, Values) {
  const std::vector<double> half = {0.5, 0.5};
  const auto near_ce = weights_for({{0, 1, 1}, {1, 1, 1}}, ImbalanceParams(1e-9, 0.7));
  EXPECT_NEAR(weighted_focal_ce(half, 0, near_ce), std::log(2.0), 1e-8);
  const auto linear = weights_for({{0, 1, 1}, {1, 1, 1}}, ImbalanceParams(1.0, 0.7));
  EXPECT_NEAR(weighted_focal_ce(half, 1, linear), 0.5 * std::log(2.0), 1e-15);

  const std::vector<double> sure = {0.0, 1.0};
  EXPECT_EQ(weighted_focal_ce(sure, 1, linear), 0.0);
  EXPECT_TRUE(std::isfinite(weighted_focal_ce(sure, 0, linear)));
  EXPECT_NEAR(weighted_focal_ce(sure, 0, linear), -std::log(1e-12), 1e-9);
}

TEST(WeightedFocalCe, NonNegativeAndZeroOnlyAtCertainty) {
  const auto w = weights_for({{0, 1, 5}, {1, 1, 9}, {2, 1, 2}});
  for (int i = 1; i < 50; ++i) {
    const double p = i / 50.0;
    const std::vector<double> probs = {p, (1 - p) / 2, (1 - p) / 2};
    const double loss = weighted_focal_ce(probs, 0, w);
    EXPECT_GE(loss, 0.0);
    EXPECT_GT(loss, 0.0);
  }
}

TEST(WeightedFocalCe, ZeroCountClassHasZeroLoss) {
  const auto w = weights_for({{0, 0, 0}, {1, 1, 3}});
  const std::vector<double> probs = {0.2, 0.8};
  EXPECT_EQ(weighted_focal_ce(probs, 0, w), 0.0);
}

TEST(WeightedFocalCe, InputErrors) {
  const auto w = weights_for({{0, 1, 1}, {1, 1, 1}});
  EXPECT_THROW(weighted_focal_ce(std::vector<double>{0.5, 0.6}, 0, w), Error);
  EXPECT_THROW(weighted_focal_ce(std::vector<double>{1.5, -0.5}, 0, w), Error);
  EXPECT_THROW(weighted_focal_ce(std::vector<double>{0.5, 0.5}, 2, w), Error);
  EXPECT_THROW(weighted_focal_ce(std::vector<double>{0.5, 0.5}, -1, w), Error);
  EXPECT_NO_THROW(weighted_focal_ce(std::vector<double>{0.5, 0.5 + 5e-7}, 0, w));
}

TEST(WeightsCsv, RoundTripsValues) {
  const auto w = weights_for({{1, 1, 2}, {0, 1, 1}});
  std::istringstream in(weights_csv(w));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "action_index,n_frames,w2");
  for (const auto& e : w.entries) {
    ASSERT_TRUE(std::getline(in, line));
    const auto prefix = std::to_string(e.class_id + 1) + "," + std::to_string(e.n_frames) + ",";
    ASSERT_EQ(line.substr(0, prefix.size()), prefix);
    EXPECT_EQ(std::stod(line.substr(prefix.size())), e.w2);
  }
  EXPECT_FALSE(std::getline(in, line));
}

}  // namespace
}  // namespace actdet
