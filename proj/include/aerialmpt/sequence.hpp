#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aerialmpt/geometry.hpp"
#include "aerialmpt/image.hpp"

namespace aerialmpt {

struct SequenceMeta {
  std::string name;
  int frame_count = 0;
  double gsd_m_per_px = 0.1;
  double fps = 2.0;
  int width = 0;   // 0 = take from the first frame image
  int height = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

inline constexpr double kMinPlausibleGsd = 0.01;
inline constexpr double kMaxPlausibleGsd = 1.0;

struct Frame {
  int index = 0;
  Image image;  // empty when loaded without images
  std::vector<PointAnnotation> annotations;
};

/// Ground-truth trajectory of one id; points sorted by frame.
struct GroundTruthTrack {
  int track_id = 0;
  std::vector<PointAnnotation> points;

  int birth_frame() const { return points.front().frame_index; }
  int last_frame() const { return points.back().frame_index; }
  /// Point at `frame`, if annotated.
  const PointAnnotation* at(int frame) const;
};

/// A loaded sequence. Immutable once loaded.
class Sequence {
 public:
  Sequence() = default;
  Sequence(SequenceMeta meta, std::vector<Frame> frames, std::filesystem::path dir = {});

  const SequenceMeta& meta() const { return meta_; }
  const std::filesystem::path& directory() const { return dir_; }
  int frame_count() const { return static_cast<int>(frames_.size()); }
  const Frame& frame(int index) const { return frames_.at(static_cast<std::size_t>(index)); }
  const std::vector<Frame>& frames() const { return frames_; }
  bool has_images() const { return !frames_.empty() && !frames_.front().image.empty(); }

  /// All annotations, sorted by (frame, id).
  std::vector<PointAnnotation> annotations() const;
  const std::map<int, GroundTruthTrack>& tracks() const { return tracks_; }
  const GroundTruthTrack* track(int id) const;

 private:
  SequenceMeta meta_;
  std::filesystem::path dir_;
  std::vector<Frame> frames_;
  std::map<int, GroundTruthTrack> tracks_;
};

}  // namespace aerialmpt
