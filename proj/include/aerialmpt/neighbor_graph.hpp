#pragma once

#include <map>
#include <span>
#include <vector>

#include "aerialmpt/geometry.hpp"
#include "aerialmpt/model.hpp"

namespace aerialmpt {

struct ObjectPosition {
  int track_id = 0;
  Point2 position;
};

/// Positions of all known objects per frame (estimates and/or annotations).
class PositionBook {
 public:
  void set(int frame, int track_id, Point2 p);
  void set_frame(int frame, std::vector<ObjectPosition> objects);
  /// Objects at `frame` sorted by track id; empty when unknown.
  std::span<const ObjectPosition> at(int frame) const;
  void clear() { frames_.clear(); }

 private:
  std::map<int, std::vector<ObjectPosition>> frames_;
};

/// Up to `k` objects within `radius_px` of `target` (closed disk), ordered by (distance, track_id);
/// `exclude_id` is skipped.
std::vector<ObjectPosition> nearest_neighbors(Point2 target, std::span<const ObjectPosition> candidates, int k,
                                              double radius_px, int exclude_id);

/// Builds the neighbor matrix for one target.
/// `target_positions` holds the target's image position at each past step (oldest first, most recent last);
/// `others_per_step` the positions of every object at the same steps. Only the last history_len steps are used.
/// Coordinates are expressed in regression units of the crop described by `crop`.
/// Throws ConfigError for gsd <= 0 or mismatched step counts.
NeighborGraph build_neighbor_graph(int target_id, std::span<const Point2> target_positions,
                                   std::span<const std::span<const ObjectPosition>> others_per_step,
                                   double gsd_m_per_px, const CropTransform& crop, const NetworkConfig& cfg);

/// Graph radius in pixels: radius_m / gsd.
double graph_radius_px(const NetworkConfig& cfg, double gsd_m_per_px);

}  // namespace aerialmpt
