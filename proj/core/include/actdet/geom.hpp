#pragma once

#include <optional>

namespace actdet {

struct CenterBox;

/// Axis-aligned box in continuous pixel coordinates.
///
/// Construction validates x_min < x_max, y_min < y_max and finiteness, so a
/// BBox in hand is never degenerate. Area is (x_max - x_min) * (y_max - y_min),
/// no +1 pixel convention.
class BBox {
 public:
  BBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }

  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

/// Center/size parameterization used by anchors and the grid decoder.
struct CenterBox {
  double cx;
  double cy;
  double w;
  double h;

  CenterBox(double cx, double cy, double w, double h);

  friend bool operator==(const CenterBox&, const CenterBox&) = default;
};

double intersection_area(const BBox& a, const BBox& b) noexcept;

/// Intersection over union, in [0, 1]; 0 for disjoint or edge-touching boxes.
double iou(const BBox& a, const BBox& b) noexcept;

CenterBox to_center(const BBox& b) noexcept;
BBox to_corner(const CenterBox& c);

// Clamps to [0, width] x [0, height]. Returns nullopt when nothing of the box
// is left inside the image.
std::optional<BBox> clip_to_image(double x_min, double y_min, double x_max, double y_max,
                                  double width, double height);

}  // namespace actdet
