#include <gtest/gtest.h>

#include <random>
#include <set>

#include "actdet/anchors.hpp"
#include "actdet/error.hpp"
#include "support/oracles.hpp"

namespace actdet {
namespace {

std::vector<ShapeSample> random_samples(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<ShapeSample> out;
  for (int i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng));
  return out;
}

std::vector<oracle::Pt> to_pts(const std::vector<ShapeSample>& s) {
  std::vector<oracle::Pt> out;
  for (const auto& x : s) out.push_back({x.w, x.h});
  return out;
}

KMeansOptions with_k(int k, std::uint64_t seed = 42) {
  KMeansOptions o;
  o.k = k;
  o.seed = seed;
  return o;
}

TEST(ShapeSample, Bounds) {
  EXPECT_THROW(ShapeSample(0.0, 0.5), Error);
  EXPECT_THROW(ShapeSample(0.5, 1.5), Error);
  EXPECT_NO_THROW(ShapeSample(1.0, 1.0));
}

TEST(ShapesFromAnnotations, NormalizesByImage) {
  const std::vector<FrameAnnotation> frames = {
      FrameAnnotation{"v", 0, {{0, BBox(0, 0, 640, 180)}, {1, BBox(10, 10, 138, 82)}}}};
  const auto s = shapes_from_annotations(frames, 1280, 720);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], ShapeSample(0.5, 0.25));
  EXPECT_EQ(s[1], ShapeSample(0.1, 0.1));
  EXPECT_THROW(shapes_from_annotations(frames, 320, 100), Error);
}

TEST(KMeans, DuplicatesAndOutlier) {
  const std::vector<ShapeSample> s = {{0.1, 0.1}, {0.1, 0.1}, {0.9, 0.9}};
  const auto r = kmeans_anchors(s, with_k(2));
  EXPECT_EQ(r.inertia, 0.0);
  const std::set<std::pair<double, double>> got = {{r.centroids[0].w, r.centroids[0].h},
                                                   {r.centroids[1].w, r.centroids[1].h}};
  EXPECT_EQ(got, (std::set<std::pair<double, double>>{{0.1, 0.1}, {0.9, 0.9}}));
  EXPECT_EQ(oracle::optimal_inertia(to_pts(s), 2), 0.0);
}

TEST(KMeans, KEqualsDistinctCountGivesZeroInertia) {
  std::mt19937_64 rng(1);
  const auto s = random_samples(rng, 9);
  EXPECT_EQ(kmeans_anchors(s, with_k(9)).inertia, 0.0);
}

TEST(KMeans, SingleClusterClosedForm) {
  const std::vector<ShapeSample> two = {{0.2, 0.2}, {0.4, 0.4}};
  const auto r = kmeans_anchors(two, with_k(1));
  EXPECT_NEAR(r.centroids[0].w, 0.3, 1e-15);
  EXPECT_NEAR(r.centroids[0].h, 0.3, 1e-15);
  EXPECT_NEAR(r.inertia, 0.04, 1e-15);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_samples(rng, 40);
    double mw = 0, mh = 0;
    for (const auto& x : s) {
      mw += x.w;
      mh += x.h;
    }
    mw /= s.size();
    mh /= s.size();
    double var = 0;
    for (const auto& x : s) var += (x.w - mw) * (x.w - mw) + (x.h - mh) * (x.h - mh);
    const auto k1 = kmeans_anchors(s, with_k(1, rng()));
    ASSERT_NEAR(k1.centroids[0].w, mw, 1e-12);
    ASSERT_NEAR(k1.centroids[0].h, mh, 1e-12);
    ASSERT_NEAR(k1.inertia, var, 1e-12);
  }
}

TEST(KMeans, ArgumentErrors) {
  const std::vector<ShapeSample> s = {{0.1, 0.1}, {0.2, 0.2}};
  EXPECT_THROW(kmeans_anchors(s, with_k(3)), Error);
  EXPECT_THROW(kmeans_anchors(s, with_k(0)), Error);
  auto o = with_k(1);
  o.tol = 0.0;
  EXPECT_THROW(kmeans_anchors(s, o), Error);
  o = with_k(1);
  o.max_iter = 0;
  EXPECT_THROW(kmeans_anchors(s, o), Error);
}

TEST(KMeans, InertiaNeverIncreasesAndMatchesAssignment) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> n(5, 120), k(1, 8);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_samples(rng, n(rng));
    const int kk = std::min<int>(k(rng), static_cast<int>(s.size()));
    const auto r = kmeans_anchors(s, with_k(kk, rng()));
    ASSERT_GE(r.inertia_history.size(), 2u);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
      ASSERT_LE(r.inertia_history[i], r.inertia_history[i - 1]) << "trial " << t << " step " << i;
    }
    ASSERT_LE(r.inertia, r.inertia_history.front());
    ASSERT_EQ(r.inertia, r.inertia_history.back());
    double recomputed = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      recomputed += anchor_distance(s[i], r.centroids[static_cast<std::size_t>(r.assignment[i])],
                                    AnchorMetric::kEuclidean);
    }
    ASSERT_EQ(r.inertia, recomputed);
    for (const auto& c : r.centroids) {
      ASSERT_GT(c.w, 0.0);
      ASSERT_LE(c.w, 1.0);
    }
  }
}

TEST(KMeans, SmallInstancesAreLocallyOptimal) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> n(3, 8), k(1, 3);
  int hit_global = 0, trials = 0;
  for (int t = 0; t < 300; ++t) {
    const auto s = random_samples(rng, n(rng));
    const int kk = k(rng);
    const auto r = kmeans_anchors(s, with_k(kk, rng()));
    const auto pts = to_pts(s);
    const double best = oracle::optimal_inertia(pts, kk);
    ASSERT_GE(r.inertia, best * (1 - 1e-9) - 1e-15);
    ++trials;
    if (r.inertia <= best * (1 + 1e-9)) {
      ++hit_global;
      continue;
    }
    // Not globally optimal: no single point move may help.
    std::vector<int> counts(static_cast<std::size_t>(kk), 0);
    for (const int a : r.assignment) ++counts[static_cast<std::size_t>(a)];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (counts[static_cast<std::size_t>(r.assignment[i])] == 1) continue;
      for (int b = 0; b < kk; ++b) {
        if (b == r.assignment[i]) continue;
        auto moved = r.assignment;
        moved[i] = b;
        ASSERT_GE(oracle::partition_inertia(pts, moved, kk), r.inertia * (1 - 1e-9));
      }
    }
  }
  EXPECT_GT(hit_global, trials / 2);
}

TEST(KMeans, DeterministicPerSeed) {
  std::mt19937_64 rng(5);
  const auto s = random_samples(rng, 60);
  const auto a = kmeans_anchors(s, with_k(5, 7));
  const auto b = kmeans_anchors(s, with_k(5, 7));
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia, b.inertia);
  EXPECT_EQ(anchors_json(a), anchors_json(b));
}

TEST(KMeans, RestartsNeverHurt) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_samples(rng, 50);
    auto o = with_k(4, rng());
    const auto one = kmeans_anchors(s, o);
    o.restarts = 5;
    EXPECT_LE(kmeans_anchors(s, o).inertia, one.inertia);
  }
}

TEST(KMeans, IouMetricProducesValidAnchors) {
  std::mt19937_64 rng(7);
  const auto s = random_samples(rng, 80);
  auto o = with_k(5);
  o.metric = AnchorMetric::kIou;
  const auto r = kmeans_anchors(s, o);
  EXPECT_EQ(r.centroids.size(), 5u);
  EXPECT_GE(r.inertia, 0.0);
  EXPECT_LT(r.inertia, double(s.size()));
  EXPECT_EQ(anchor_distance(ShapeSample(0.2, 0.4), ShapeSample(0.2, 0.4), AnchorMetric::kIou), 0.0);
  EXPECT_NEAR(anchor_distance(ShapeSample(0.2, 0.2), ShapeSample(0.4, 0.4), AnchorMetric::kIou), 0.75, 1e-15);
}

std::vector<ShapeSample> three_blobs(std::mt19937_64& rng) {
  // radius 0.005 blobs, centers at least 0.3 apart
  const std::vector<std::pair<double, double>> centers = {{0.1, 0.15}, {0.45, 0.5}, {0.85, 0.2}};
  std::uniform_real_distribution<double> jitter(-0.005, 0.005);
  std::vector<ShapeSample> out;
  for (const auto& [cw, ch] : centers) {
    for (int i = 0; i < 30; ++i) out.emplace_back(cw + jitter(rng), ch + jitter(rng));
  }
  return out;
}

TEST(SelectK, ThreeBlobsElbowAtThree) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto s = three_blobs(rng);
    const auto sel = select_k(s, 2, 6, with_k(1, rng()));
    EXPECT_EQ(sel.chosen_k, 3);
    ASSERT_EQ(sel.profile.size(), 5u);
    EXPECT_EQ(sel.profile.front().k, 2);
    EXPECT_EQ(sel.profile.back().k, 6);
  }
}

TEST(SelectK, TieGoesToSmallerK) {
  const std::vector<ShapeSample> s = {{0.1, 0.1}, {0.5, 0.5}, {0.9, 0.9}};
  EXPECT_EQ(select_k(s, 2, 3, with_k(1)).chosen_k, 2);
  // flat zero profile
  const std::vector<ShapeSample> four = {{0.1, 0.1}, {0.2, 0.2}, {0.3, 0.3}, {0.4, 0.4}};
  EXPECT_EQ(select_k(four, 1, 2, with_k(1)).chosen_k, 1);
}

TEST(SelectK, ProfileIsNonIncreasing) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 60; ++t) {
    const auto s = random_samples(rng, 25);
    const auto sel = select_k(s, 1, 8, with_k(1, rng()));
    for (std::size_t i = 1; i < sel.profile.size(); ++i) {
      ASSERT_LE(sel.profile[i].inertia, sel.profile[i - 1].inertia);
    }
  }
}

TEST(SelectK, RangeErrors) {
  const std::vector<ShapeSample> s = {{0.1, 0.1}, {0.1, 0.1}, {0.2, 0.2}};
  EXPECT_THROW(select_k(s, 1, 3, with_k(1)), Error);  // only 2 distinct shapes
  EXPECT_THROW(select_k(s, 2, 2, with_k(1)), Error);
  EXPECT_THROW(select_k(s, 0, 2, with_k(1)), Error);
}

TEST(AnchorsJson, SortedByAreaAndParsable) {
  AnchorSet a;
  a.centroids = {{0.5, 0.5}, {0.1, 0.2}, {0.3, 0.1}};
  a.k = 3;
  a.inertia = 0.25;
  a.seed = 7;
  const auto text = anchors_json(a);
  EXPECT_EQ(text, R"({"k":3,"inertia":0.25,"seed":7,"anchors":[[0.1,0.2],[0.3,0.1],[0.5,0.5]]})" "\n");
  const auto back = parse_anchors_json(text);
  EXPECT_EQ(back.k, 3);
  EXPECT_EQ(back.centroids[2], ShapeSample(0.5, 0.5));
  EXPECT_EQ(back.seed, 7u);
  EXPECT_THROW(parse_anchors_json(R"({"anchors": []})"), Error);
  EXPECT_THROW(parse_anchors_json(R"({"k": 2, "anchors": [[0.1, 0.1]]})"), Error);
  EXPECT_THROW(parse_anchors_json(R"({"anchors": [[0.1, 2.0]]})"), Error);
  EXPECT_THROW(parse_anchors_json("nope"), Error);
}

TEST(InertiaProfile, Csv) {
  const std::vector<InertiaPoint> p = {{2, 1.5, false}, {3, 0.25, true}};
  EXPECT_EQ(inertia_profile_csv(p), "k,inertia\n2,1.5\n3,0.25\n");
}

}  // namespace
}  // namespace actdet
