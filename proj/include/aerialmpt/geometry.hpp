#pragma once

#include <cmath>

namespace aerialmpt {

/// Axis-aligned box in corner form, real-valued pixel coordinates.
struct PixelBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x1 <= x2 && y1 <= y2 && std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2); }

  static PixelBox centered(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Point label of one individual in one frame.
struct PointAnnotation {
  int frame_index = 0;
  int track_id = 1;
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PointAnnotation&, const PointAnnotation&) = default;
};

/// Maps crop pixel coordinates to image pixel coordinates: image = offset + scale * crop.
struct CropTransform {
  double offset_x = 0.0;
  double offset_y = 0.0;
  double scale_x = 1.0;
  double scale_y = 1.0;

  CropTransform inverse() const;
  Point2 to_image(Point2 p) const { return {offset_x + scale_x * p.x, offset_y + scale_y * p.y}; }
  Point2 to_crop(Point2 p) const { return {(p.x - offset_x) / scale_x, (p.y - offset_y) / scale_y}; }
};

/// Intersection over union; zero when the union is empty.
double iou(const PixelBox& a, const PixelBox& b);

inline constexpr double kDefaultPersonExtentM = 0.4;
inline constexpr double kDefaultMinBoxSide = 4.0;

/// Square box centered on a point label. Side is max(round(extent / gsd), min_side).
/// Throws ConfigError when gsd or extent is not positive.
PixelBox point_to_box(double x, double y, double gsd_m_per_px, double person_extent_m = kDefaultPersonExtentM,
                      double min_side = kDefaultMinBoxSide);
PixelBox point_to_box(const PointAnnotation& p, double gsd_m_per_px, double person_extent_m = kDefaultPersonExtentM,
                      double min_side = kDefaultMinBoxSide);

PixelBox apply_transform(const PixelBox& box_in_crop, const CropTransform& t);
CropTransform invert(const CropTransform& t);

}  // namespace aerialmpt
