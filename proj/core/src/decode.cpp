#include "actdet/decode.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "actdet/error.hpp"

namespace actdet {

namespace {

constexpr std::array<char, 4> kMagic{'G', 'R', 'I', 'D'};

std::uint32_t load_u32(const unsigned char* p) noexcept {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

void store_u32(unsigned char* p, std::uint32_t v) noexcept {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

GridOutput::GridOutput(std::uint32_t width, std::uint32_t height, std::uint32_t anchors,
                       std::uint32_t classes, std::vector<float> values)
    : width_(width), height_(height), anchors_(anchors), classes_(classes), values_(std::move(values)) {
  if (width == 0 || height == 0 || anchors == 0 || classes == 0) {
    throw Error("grid dimensions, anchor count and class count must be positive");
  }
  const std::size_t expected =
      std::size_t{width} * std::size_t{height} * std::size_t{anchors} * record_size();
  if (values_.size() != expected) {
    throw Error("grid holds " + std::to_string(values_.size()) + " values, shape needs " +
                std::to_string(expected));
  }
  if (!std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); })) {
    throw Error("grid contains non-finite values");
  }
}

std::span<const float> GridOutput::record(std::uint32_t col, std::uint32_t row,
                                          std::uint32_t anchor) const {
  if (col >= width_ || row >= height_ || anchor >= anchors_) {
    throw Error("grid record (" + std::to_string(col) + ", " + std::to_string(row) + ", " +
                std::to_string(anchor) + ") out of range");
  }
  const std::size_t cell = std::size_t{row} * width_ + col;
  const std::size_t offset = (cell * anchors_ + anchor) * record_size();
  return std::span<const float>(values_).subspan(offset, record_size());
}

GridOutput read_grid(std::istream& in) {
  std::array<unsigned char, 20> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
    throw Error("grid file shorter than its 20-byte header");
  }
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error("grid file does not start with \"GRID\"");
  }
  const auto w = load_u32(header.data() + 4);
  const auto h = load_u32(header.data() + 8);
  const auto a = load_u32(header.data() + 12);
  const auto c = load_u32(header.data() + 16);
  if (w == 0 || h == 0 || a == 0 || c == 0) throw Error("grid header has a zero dimension");
  const std::uint64_t count = std::uint64_t{w} * h * a * (5ULL + c);
  if (count > (std::uint64_t{1} << 32)) throw Error("grid header declares an implausible size");

  std::vector<unsigned char> raw(static_cast<std::size_t>(count) * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error("grid file truncated: expected " + std::to_string(count) + " floats");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes after grid payload");

  std::vector<float> values(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(load_u32(raw.data() + 4 * i));
  }
  return GridOutput(w, h, a, c, std::move(values));
}

void write_grid(std::ostream& out, const GridOutput& grid) {
  std::vector<unsigned char> buf(20 + 4 * grid.values().size());
  std::memcpy(buf.data(), kMagic.data(), kMagic.size());
  store_u32(buf.data() + 4, grid.width());
  store_u32(buf.data() + 8, grid.height());
  store_u32(buf.data() + 12, grid.anchors());
  store_u32(buf.data() + 16, grid.classes());
  for (std::size_t i = 0; i < grid.values().size(); ++i) {
    store_u32(buf.data() + 20 + 4 * i, std::bit_cast<std::uint32_t>(grid.values()[i]));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<Detection> decode_grid(const GridOutput& grid, const AnchorSet& anchors,
                                   double image_w, double image_h, double conf_floor,
                                   const FrameRef& frame) {
  if (anchors.centroids.size() != grid.anchors()) {
    throw Error("grid has " + std::to_string(grid.anchors()) + " anchors per cell, anchor set has " +
                std::to_string(anchors.centroids.size()));
  }
  if (!(image_w > 0.0) || !(image_h > 0.0)) throw Error("image size must be positive");
  if (!(conf_floor >= 0.0 && conf_floor <= 1.0)) throw Error("confidence floor must lie in [0, 1]");
  if (frame.frame_index < 0) throw Error("negative frame index");

  std::vector<Detection> out;
  std::vector<double> probs(grid.classes());
  for (std::uint32_t row = 0; row < grid.height(); ++row) {
    for (std::uint32_t col = 0; col < grid.width(); ++col) {
      for (std::uint32_t a = 0; a < grid.anchors(); ++a) {
        const auto r = grid.record(col, row, a);
        const auto logits = r.subspan(5);
        const double max_logit = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (std::size_t c = 0; c < logits.size(); ++c) {
          probs[c] = std::exp(double(logits[c]) - max_logit);
          z += probs[c];
        }
        const auto best = static_cast<std::size_t>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        const double conf = sigmoid(r[4]) * (probs[best] / z);
        if (conf < conf_floor) continue;

        const auto& anchor = anchors.centroids[a];
        const double cx = (col + sigmoid(r[0])) / grid.width() * image_w;
        const double cy = (row + sigmoid(r[1])) / grid.height() * image_h;
        const double w = anchor.w * std::exp(double(r[2])) * image_w;
        const double h = anchor.h * std::exp(double(r[3])) * image_h;
        auto box = clip_to_image(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, image_w,
                                 image_h);
        if (!box) continue;
        out.push_back(Detection{frame.video_id, frame.frame_index, static_cast<ClassId>(best),
                                std::clamp(conf, 0.0, 1.0), *box});
      }
    }
  }
  return out;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw Error("NMS threshold must lie in (0, 1]");
  // (video, frame, class) -> member indices in input order
  std::map<std::tuple<std::string_view, FrameIndex, ClassId>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    groups[{dets[i].video_id, dets[i].frame_index, dets[i].class_id}].push_back(i);
  }

  std::vector<bool> keep(dets.size(), false);
  for (auto& [_, members] : groups) {
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return dets[a].confidence > dets[b].confidence;
    });
    std::vector<std::size_t> kept;
    for (const auto i : members) {
      const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
        return iou(dets[k].bbox, dets[i].bbox) >= iou_threshold;
      });
      if (!suppressed) {
        kept.push_back(i);
        keep[i] = true;
      }
    }
  }

  std::vector<Detection> out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (keep[i]) out.push_back(dets[i]);
  }
  return out;
}

}  // namespace actdet
