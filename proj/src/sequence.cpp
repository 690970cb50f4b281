#include "aerialmpt/sequence.hpp"

#include <algorithm>
#include <cmath>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

void SequenceMeta::validate() const {
  if (name.empty()) throw ConfigError("sequence meta: field 'name' is empty");
  if (frame_count <= 0) throw ConfigError("sequence meta: field 'frame_count' must be positive");
  if (!(gsd_m_per_px >= kMinPlausibleGsd && gsd_m_per_px <= kMaxPlausibleGsd)) {
    throw ConfigError("sequence meta: field 'gsd' = " + std::to_string(gsd_m_per_px) + " outside plausible band [0.01, 1.0]");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ConfigError("sequence meta: field 'fps' must be positive");
  if (width < 0 || height < 0) throw ConfigError("sequence meta: negative image size");
}

const PointAnnotation* GroundTruthTrack::at(int frame) const {
  auto it = std::lower_bound(points.begin(), points.end(), frame,
                             [](const PointAnnotation& p, int f) { return p.frame_index < f; });
  if (it == points.end() || it->frame_index != frame) return nullptr;
  return &*it;
}

Sequence::Sequence(SequenceMeta meta, std::vector<Frame> frames, std::filesystem::path dir)
    : meta_(std::move(meta)), dir_(std::move(dir)), frames_(std::move(frames)) {
  for (auto& f : frames_) {
    std::sort(f.annotations.begin(), f.annotations.end(),
              [](const PointAnnotation& a, const PointAnnotation& b) { return a.track_id < b.track_id; });
    for (const auto& a : f.annotations) {
      auto& t = tracks_[a.track_id];
      t.track_id = a.track_id;
      t.points.push_back(a);
    }
  }
}

std::vector<PointAnnotation> Sequence::annotations() const {
  std::vector<PointAnnotation> out;
  for (const auto& f : frames_) out.insert(out.end(), f.annotations.begin(), f.annotations.end());
  return out;
}

const GroundTruthTrack* Sequence::track(int id) const {
  auto it = tracks_.find(id);
  return it == tracks_.end() ? nullptr : &it->second;
}

}  // namespace aerialmpt
