#include <benchmark/benchmark.h>

#include <random>

#include "actdet/decode.hpp"
#include "actdet/geom.hpp"

namespace {

using namespace actdet;

void BM_Iou(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0, 600), ext(1, 200);
  std::vector<BBox> boxes;
  for (int i = 0; i < 1024; ++i) {
    const double x = pos(rng), y = pos(rng);
    boxes.emplace_back(x, y, x + ext(rng), y + ext(rng));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(iou(boxes[i & 1023], boxes[(i * 7 + 3) & 1023]));
    ++i;
  }
}
BENCHMARK(BM_Iou);

void BM_DecodeGrid(benchmark::State& state) {
  std::mt19937 rng(5);
  std::normal_distribution<float> n;
  const std::uint32_t side = 13, anchors = 5, classes = 24;
  std::vector<float> v(side * side * anchors * (5 + classes));
  for (auto& x : v) x = n(rng);
  const GridOutput grid(side, side, anchors, classes, v);
  AnchorSet a;
  a.k = 5;
  a.centroids = {{0.05, 0.1}, {0.1, 0.2}, {0.2, 0.3}, {0.3, 0.5}, {0.6, 0.7}};
  for (auto _ : state) {
    auto dets = decode_grid(grid, a, 1280, 720, 0.0, FrameRef{"v", 0});
    benchmark::DoNotOptimize(nms(dets));
  }
}
BENCHMARK(BM_DecodeGrid)->Unit(benchmark::kMicrosecond);

}  // namespace
