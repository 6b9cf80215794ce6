#include "actdet/geom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "actdet/error.hpp"

namespace actdet {

namespace {

std::string describe(double x_min, double y_min, double x_max, double y_max) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << x_min << ", " << y_min << ", " << x_max << ", " << y_max << ")";
  return os.str();
}

}  // namespace

BBox::BBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    throw InvalidBox("non-finite box coordinates " + describe(x_min, y_min, x_max, y_max));
  }
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw InvalidBox("degenerate box " + describe(x_min, y_min, x_max, y_max) +
                     ": need x_min < x_max and y_min < y_max");
  }
}

CenterBox::CenterBox(double cx_, double cy_, double w_, double h_) : cx(cx_), cy(cy_), w(w_), h(h_) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h)) {
    throw InvalidBox("non-finite center box");
  }
  if (!(w > 0.0) || !(h > 0.0)) {
    throw InvalidBox("center box needs w > 0 and h > 0");
  }
}

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  // inter <= min(area) <= union mathematically; rounding can push the ratio a hair past 1.
  return std::min(1.0, inter / uni);
}

CenterBox to_center(const BBox& b) noexcept {
  return CenterBox(0.5 * (b.x_min() + b.x_max()), 0.5 * (b.y_min() + b.y_max()), b.width(),
                   b.height());
}

BBox to_corner(const CenterBox& c) {
  return BBox(c.cx - 0.5 * c.w, c.cy - 0.5 * c.h, c.cx + 0.5 * c.w, c.cy + 0.5 * c.h);
}

std::optional<BBox> clip_to_image(double x_min, double y_min, double x_max, double y_max,
                                  double width, double height) {
  const double x0 = std::clamp(x_min, 0.0, width);
  const double y0 = std::clamp(y_min, 0.0, height);
  const double x1 = std::clamp(x_max, 0.0, width);
  const double y1 = std::clamp(y_max, 0.0, height);
  if (!(x0 < x1) || !(y0 < y1)) return std::nullopt;
  return BBox(x0, y0, x1, y1);
}

}  // namespace actdet
