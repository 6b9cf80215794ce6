#include <gtest/gtest.h>

#include <random>

#include "actdet/error.hpp"
#include "actdet/geom.hpp"
#include "support/oracles.hpp"

namespace actdet {
namespace {

TEST(BBox, RejectsDegenerateAndNonFinite) {
  EXPECT_THROW(BBox(0, 0, 0, 10), InvalidBox);
  EXPECT_THROW(BBox(5, 0, 1, 10), InvalidBox);
  EXPECT_THROW(BBox(0, 3, 10, 3), InvalidBox);
  EXPECT_THROW(BBox(0, 0, std::numeric_limits<double>::infinity(), 1), InvalidBox);
  EXPECT_THROW(BBox(std::nan(""), 0, 1, 1), InvalidBox);
  EXPECT_NO_THROW(BBox(-5, -5, 1e-3, 1e-3));
}

TEST(Iou, WorkedValues) {
  const BBox a(0, 0, 10, 10);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, BBox(20, 20, 30, 30)), 0.0);
  // intersection 50, union 150
  EXPECT_NEAR(iou(a, BBox(5, 0, 15, 10)), 1.0 / 3.0, 1e-15);
  // touching edges share no area
  EXPECT_EQ(iou(a, BBox(10, 0, 20, 10)), 0.0);
}

TEST(Iou, ContainmentIsAreaRatio) {
  EXPECT_DOUBLE_EQ(iou(BBox(0, 0, 10, 10), BBox(2, 2, 7, 7)), 25.0 / 100.0);
}

TEST(Iou, MatchesRasterOracleOnRandomIntegerBoxes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(0, 32), extent(1, 32);
  for (int t = 0; t < 2000; ++t) {
    oracle::IntBox a{coord(rng), coord(rng), 0, 0}, b{coord(rng), coord(rng), 0, 0};
    a.x1 = a.x0 + extent(rng);
    a.y1 = a.y0 + extent(rng);
    b.x1 = b.x0 + extent(rng);
    b.y1 = b.y0 + extent(rng);
    const BBox ba(a.x0, a.y0, a.x1, a.y1), bb(b.x0, b.y0, b.x1, b.y1);
    const double v = iou(ba, bb);
    ASSERT_NEAR(v, oracle::raster_iou(a, b), 1e-12);
    ASSERT_EQ(v, iou(bb, ba));
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(CenterBox, Conversions) {
  const auto c = to_center(BBox(0, 0, 10, 10));
  EXPECT_EQ(c, CenterBox(5, 5, 10, 10));
  EXPECT_EQ(to_corner(CenterBox(5, 5, 10, 10)), BBox(0, 0, 10, 10));
  EXPECT_THROW(CenterBox(0, 0, 0, 1), InvalidBox);
  EXPECT_THROW(CenterBox(0, 0, 1, -1), InvalidBox);
}

TEST(CenterBox, RoundTripWithinRelativeTolerance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-1e4, 1e4), ext(1e-3, 1e4);
  for (int t = 0; t < 10000; ++t) {
    const double x = pos(rng), y = pos(rng);
    const BBox b(x, y, x + ext(rng), y + ext(rng));
    const BBox r = to_corner(to_center(b));
    const double scale = std::max({std::abs(b.x_min()), std::abs(b.x_max()), std::abs(b.y_min()),
                                   std::abs(b.y_max()), 1.0});
    ASSERT_NEAR(r.x_min(), b.x_min(), 1e-9 * scale);
    ASSERT_NEAR(r.y_min(), b.y_min(), 1e-9 * scale);
    ASSERT_NEAR(r.x_max(), b.x_max(), 1e-9 * scale);
    ASSERT_NEAR(r.y_max(), b.y_max(), 1e-9 * scale);
  }
}

TEST(ClipToImage, ClampsAndDropsOutside) {
  const auto in = clip_to_image(-5, -5, 50, 200, 100, 100);
  ASSERT_TRUE(in.has_value());
  EXPECT_EQ(*in, BBox(0, 0, 50, 100));
  EXPECT_FALSE(clip_to_image(120, 0, 150, 10, 100, 100).has_value());
}

}  // namespace
}  // namespace actdet
