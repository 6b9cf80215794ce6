#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "actdet/anchors.hpp"
#include "actdet/eval.hpp"

namespace actdet {

/// Raw output of an anchor-based detection head for one frame.
///
/// Values are cell-major (cells in row-major order: cell = row * width + col),
/// anchor-minor, and each (cell, anchor) record holds
/// t_x, t_y, t_w, t_h, objectness, then one logit per class.
class GridOutput {
 public:
  GridOutput(std::uint32_t width, std::uint32_t height, std::uint32_t anchors,
             std::uint32_t classes, std::vector<float> values);

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t anchors() const noexcept { return anchors_; }
  std::uint32_t classes() const noexcept { return classes_; }
  std::size_t record_size() const noexcept { return 5 + std::size_t{classes_}; }
  std::span<const float> values() const noexcept { return values_; }

  std::span<const float> record(std::uint32_t col, std::uint32_t row, std::uint32_t anchor) const;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::uint32_t anchors_;
  std::uint32_t classes_;
  std::vector<float> values_;
};

// Binary layout: "GRID", then width, height, anchors, classes as little-endian
// uint32, then the values as little-endian float32. Trailing bytes are an error.
GridOutput read_grid(std::istream& in);
void write_grid(std::ostream& out, const GridOutput& grid);

struct FrameRef {
  std::string video_id;
  FrameIndex frame_index = 0;
};

/// YOLOv2-style decoding. For cell (col, row) and anchor a:
///   center = ((col + sigmoid(t_x)) / width * image_w, (row + sigmoid(t_y)) / height * image_h)
///   size   = (anchor_w * exp(t_w) * image_w, anchor_h * exp(t_h) * image_h)
/// and the confidence of class c is sigmoid(objectness) * softmax(logits)_c.
/// One detection per (cell, anchor) at the argmax class (lowest index on
/// ties), kept when its confidence >= conf_floor; boxes are clipped to the
/// image and dropped if nothing remains. Output is in (cell, anchor) order.
///
/// Throws Error when anchors.k differs from the grid's anchor count or the
/// arguments are out of range.
std::vector<Detection> decode_grid(const GridOutput& grid, const AnchorSet& anchors,
                                   double image_w, double image_h, double conf_floor,
                                   const FrameRef& frame);

/// Per-class greedy suppression within each frame: keep the most confident
/// box, drop every same-class box with IoU >= threshold against a kept one.
/// Survivors keep their input order. Throws Error unless 0 < iou_threshold <= 1.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold = 0.45);

}  // namespace actdet
