#pragma once

#include <cmath>
#include <utility>

namespace msdat {

/// Axis-aligned box in image pixels, top-left corner plus size. Pixel i
/// covers [i, i + 1), so the centre of a box is (x + w/2, y + h/2).
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }
  static Rect from_center(double cx, double cy, double w, double h) { return {cx - w / 2.0, cy - h / 2.0, w, h}; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Window centred on a point, in image pixels.
struct WindowGeometry {
  double center_x = 0.0;
  double center_y = 0.0;
  double side_w = 0.0;
  double side_h = 0.0;

  double left() const { return center_x - side_w / 2.0; }
  double right() const { return center_x + side_w / 2.0; }
  double top() const { return center_y - side_h / 2.0; }
  double bottom() const { return center_y + side_h / 2.0; }

  /// All four edges of `inner` lie within this window.
  bool contains(const WindowGeometry& inner) const {
    return inner.left() >= left() && inner.right() <= right() && inner.top() >= top() && inner.bottom() <= bottom();
  }

  friend bool operator==(const WindowGeometry&, const WindowGeometry&) = default;
};

struct WindowPair {
  WindowGeometry kcf;
  WindowGeometry input;
};

/// KCF window = window_scale x target, input window = (1 + margin) x KCF
/// window, both centred on the target.
inline WindowPair compute_windows(const Rect& target, double window_scale, double margin) {
  WindowPair p;
  p.kcf = {target.center_x(), target.center_y(), window_scale * target.w, window_scale * target.h};
  p.input = {p.kcf.center_x, p.kcf.center_y, (1.0 + margin) * p.kcf.side_w, (1.0 + margin) * p.kcf.side_h};
  return p;
}

/// Nearest integer, halves rounded away from zero.
inline int round_half_away(double v) { return static_cast<int>(std::round(v)); }

/// Cell offset of an image-space edge inside a feature map whose cell 0
/// starts at `origin` and whose cells are `stride` pixels wide.
inline int crop_offset(double edge, double origin, double stride) { return round_half_away((edge - origin) / stride); }

}  // namespace msdat
