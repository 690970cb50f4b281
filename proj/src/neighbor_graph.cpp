#include "aerialmpt/neighbor_graph.hpp"

#include <algorithm>
#include <cmath>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

void PositionBook::set(int frame, int track_id, Point2 p) {
  auto& v = frames_[frame];
  auto it = std::lower_bound(v.begin(), v.end(), track_id,
                             [](const ObjectPosition& o, int id) { return o.track_id < id; });
  if (it != v.end() && it->track_id == track_id) {
    it->position = p;
  } else {
    v.insert(it, ObjectPosition{track_id, p});
  }
}

void PositionBook::set_frame(int frame, std::vector<ObjectPosition> objects) {
  std::sort(objects.begin(), objects.end(),
            [](const ObjectPosition& a, const ObjectPosition& b) { return a.track_id < b.track_id; });
  frames_[frame] = std::move(objects);
}

std::span<const ObjectPosition> PositionBook::at(int frame) const {
  auto it = frames_.find(frame);
  if (it == frames_.end()) return {};
  return it->second;
}

double graph_radius_px(const NetworkConfig& cfg, double gsd) {
  if (!(gsd > 0.0)) throw ConfigError("neighbor graph: gsd must be positive");
  return cfg.graph_radius_m / gsd;
}

std::vector<ObjectPosition> nearest_neighbors(Point2 target, std::span<const ObjectPosition> candidates, int k,
                                              double radius_px, int exclude_id) {
  struct Cand {
    double dist;
    ObjectPosition obj;
  };
  std::vector<Cand> in_range;
  for (const auto& c : candidates) {
    if (c.track_id == exclude_id) continue;
    const double d = std::hypot(c.position.x - target.x, c.position.y - target.y);
    if (d <= radius_px) in_range.push_back({d, c});
  }
  const auto n = std::min<std::size_t>(in_range.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::partial_sort(in_range.begin(), in_range.begin() + static_cast<std::ptrdiff_t>(n), in_range.end(),
                    [](const Cand& a, const Cand& b) {
                      if (a.dist != b.dist) return a.dist < b.dist;
                      return a.obj.track_id < b.obj.track_id;
                    });
  std::vector<ObjectPosition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(in_range[i].obj);
  return out;
}

NeighborGraph build_neighbor_graph(int target_id, std::span<const Point2> target_positions,
                                   std::span<const std::span<const ObjectPosition>> others_per_step, double gsd,
                                   const CropTransform& crop, const NetworkConfig& cfg) {
  const double radius = graph_radius_px(cfg, gsd);
  if (target_positions.size() != others_per_step.size()) {
    throw ConfigError("neighbor graph: target positions and neighbor lists differ in length");
  }
  NeighborGraph g(cfg.graph_rows(), cfg.history_len);
  const std::size_t steps = std::min<std::size_t>(target_positions.size(), static_cast<std::size_t>(cfg.history_len));
  const std::size_t first = target_positions.size() - steps;
  const double unit_x = kOutputRange / (crop.scale_x * cfg.crop_size);
  const double unit_y = kOutputRange / (crop.scale_y * cfg.crop_size);
  for (std::size_t s = 0; s < steps; ++s) {
    const int col = static_cast<int>(s);
    const Point2 p = target_positions[first + s];
    const Point2 in_crop = crop.to_crop(p);
    g.at(0, col) = in_crop.x * kOutputRange / cfg.crop_size;
    g.at(1, col) = in_crop.y * kOutputRange / cfg.crop_size;
    const auto nbrs = nearest_neighbors(p, others_per_step[first + s], cfg.graph_neighbors, radius, target_id);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      g.at(2 + 2 * static_cast<int>(k), col) = (nbrs[k].position.x - p.x) * unit_x;
      g.at(3 + 2 * static_cast<int>(k), col) = (nbrs[k].position.y - p.y) * unit_y;
    }
  }
  g.valid_cols = static_cast<int>(steps);
  return g;
}

}  // namespace aerialmpt
