#include "aerialmpt/geometry.hpp"

#include <algorithm>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

double iou(const PixelBox& a, const PixelBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = std::max(a.area(), 0.0) + std::max(b.area(), 0.0) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

PixelBox point_to_box(double x, double y, double gsd_m_per_px, double person_extent_m, double min_side) {
  if (!(gsd_m_per_px > 0.0)) throw ConfigError("point_to_box: gsd must be positive");
  if (!(person_extent_m > 0.0)) throw ConfigError("point_to_box: person extent must be positive");
  const double side = std::max(std::round(person_extent_m / gsd_m_per_px), min_side);
  return PixelBox::centered(x, y, side, side);
}

PixelBox point_to_box(const PointAnnotation& p, double gsd_m_per_px, double person_extent_m, double min_side) {
  return point_to_box(p.x, p.y, gsd_m_per_px, person_extent_m, min_side);
}

CropTransform CropTransform::inverse() const {
  return {-offset_x / scale_x, -offset_y / scale_y, 1.0 / scale_x, 1.0 / scale_y};
}

PixelBox apply_transform(const PixelBox& b, const CropTransform& t) {
  return {t.offset_x + t.scale_x * b.x1, t.offset_y + t.scale_y * b.y1, t.offset_x + t.scale_x * b.x2,
          t.offset_y + t.scale_y * b.y2};
}

CropTransform invert(const CropTransform& t) { return t.inverse(); }

}  // namespace aerialmpt
