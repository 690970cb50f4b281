#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerialmpt/dataset_io.hpp"
#include "aerialmpt/geometry.hpp"
#include "aerialmpt/model.hpp"
#include "aerialmpt/neighbor_graph.hpp"
#include "aerialmpt/sequence.hpp"

namespace aerialmpt {

struct TrackerConfig {
  /// Window side = context_factor * max(box side, window_min_side).
  double context_factor = 2.0;
  double window_min_side = 24.0;
  double person_extent_m = kDefaultPersonExtentM;
  double min_box_side = kDefaultMinBoxSide;
  Ablation ablation = Ablation::Full;
  /// Mark a track lost as soon as its annotated position leaves the search window (when annotations exist).
  bool gt_escape_check = true;
  /// Finish a track after the last frame its ground-truth object is annotated.
  bool end_at_gt_death = true;

  void validate() const;
  friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

enum class TrackStatus { Active, Lost, Finished };
std::string_view to_string(TrackStatus s);

struct Track {
  int track_id = 0;
  TrackStatus status = TrackStatus::Active;
  int birth_frame = 0;
  int death_frame = -1;                 // last frame with a box once no longer active
  std::vector<PixelBox> box_history;    // image coords, one per frame from birth
  std::vector<Point2> motion_px;        // displacement of consecutive estimates, capped at history_len

  int current_frame() const { return birth_frame + static_cast<int>(box_history.size()) - 1; }
  const PixelBox& current_box() const { return box_history.back(); }
  bool active() const { return status == TrackStatus::Active; }

  static Track start(int id, int frame, const PixelBox& box);
};

struct SearchWindow {
  Point2 center;
  double context_factor = 2.0;
  double side = 0.0;

  PixelBox bounds() const { return PixelBox::centered(center.x, center.y, side, side); }
  /// Closed boundary: points on the edge are inside.
  bool contains(Point2 p) const;
};

SearchWindow make_window(const PixelBox& previous_box, const TrackerConfig& cfg);

struct CropPair {
  Image target;
  Image search;
  CropTransform transform;  // crop pixels -> image pixels
};

/// Cuts both crops from the same window and resizes them to crop_size. Regions outside the image
/// take the network's mean pixel. Returns nullopt when the window does not intersect the image.
std::optional<CropPair> make_crop_pair(const Image& prev_frame, const Image& cur_frame, const SearchWindow& window,
                                       const NetworkConfig& net);

/// True iff the predicted center lies outside the window or the box has a side below 1 px.
bool detect_lost(const PixelBox& predicted_box, const SearchWindow& window);

/// Track motion as regression-unit vectors for the current window.
MotionHistory motion_history(const Track& track, const SearchWindow& window, const NetworkConfig& net);

/// Everything the network needs for one step of one track.
struct PreparedStep {
  SearchWindow window;
  CropTransform transform;
  nn::Tensor3 target;
  nn::Tensor3 search;
  MotionHistory history;
  NeighborGraph graph;

  NetworkInput input() const { return {&target, &search, &history, &graph}; }
};

/// Builds crops, motion history and neighbor graph. `others` holds positions of other objects per frame.
/// Returns nullopt when no crop can be cut (window outside the image).
std::optional<PreparedStep> prepare_step(const Track& track, const Image& prev_frame, const Image& cur_frame,
                                         const Network& net, const PositionBook& others, double gsd,
                                         const TrackerConfig& cfg);

/// Applies a raw network output: maps to image coords, appends histories, updates status.
/// `gt_center` is the annotated position in the new frame, when known.
void finish_step(Track& track, const std::array<double, 4>& output, const PreparedStep& step, const Network& net,
                 const TrackerConfig& cfg, int image_width, int image_height,
                 std::optional<Point2> gt_center = std::nullopt);

void mark_lost(Track& track);

/// Advances one active track from prev_frame to cur_frame (eval mode).
void step_track(Track& track, const Image& prev_frame, const Image& cur_frame, const Network& net,
                const PositionBook& others, double gsd, const TrackerConfig& cfg,
                std::optional<Point2> gt_center = std::nullopt);

struct LifecycleEvent {
  enum class Kind { Lost, Finished, Replaced } kind;
  int track_id = 0;
  int replacement_id = 0;
};

struct StepAllResult {
  std::vector<Hypothesis> hypotheses;
  std::vector<LifecycleEvent> events;
};

/// Supplies a fresh track in training mode; the engine swaps it in for a lost one.
using ReplacementSampler = std::function<Track()>;

/// Advances every active track. Lost tracks are replaced through `sampler` when given.
/// `gt` supplies annotated positions in cur_frame per track id (nullptr: none).
StepAllResult step_all(std::vector<Track>& tracks, const Frame& prev_frame, const Frame& cur_frame,
                       const Network& net, const PositionBook& others, double gsd, const TrackerConfig& cfg,
                       const ReplacementSampler* sampler = nullptr, const Sequence* gt = nullptr);

struct SequenceTrackingResult {
  std::vector<Hypothesis> hypotheses;
  std::vector<Track> tracks;
};

/// Tracks a whole sequence. Tracks are initialized from annotations at each object's first frame.
SequenceTrackingResult track_sequence(const Sequence& seq, const Network& net, const TrackerConfig& cfg);

}  // namespace aerialmpt
