#pragma once

// CLEAR-MOT and identity metrics.
//
// Per frame: matches from the previous frame that still pass the IoU gate are kept, the rest is
// assigned by minimum total (1 - IoU) subject to IoU > threshold. A ground-truth object matched to a
// hypothesis id other than its last match counts one identity switch.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aerialmpt/dataset_io.hpp"
#include "aerialmpt/geometry.hpp"
#include "aerialmpt/sequence.hpp"

namespace aerialmpt {

struct FrameObject {
  int id = 0;
  PixelBox box;
};

enum class MotpMode { IouDistance, PixelDistance };

struct MatchPair {
  int gt_id = 0;
  int hyp_id = 0;
  double iou = 0.0;
  double pixel_distance = 0.0;
  bool carried = false;
  bool switched = false;
};

struct FrameErrorCounts {
  int gt = 0;
  int fp = 0;
  int fn = 0;
  int id_switches = 0;
  int matches = 0;
  std::vector<double> distances;        // 1 - IoU per match
  std::vector<double> pixel_distances;  // center distance per match
};

struct MatchMemory {
  std::map<int, int> previous;  // gt id -> hyp id matched in the previous frame
  std::map<int, int> last;      // gt id -> hyp id of its most recent match
};

struct FrameMatch {
  std::vector<MatchPair> matches;
  FrameErrorCounts counts;
};

inline constexpr double kDefaultIouThreshold = 0.5;

/// Throws ConfigError on duplicate ids. Updates `memory`.
FrameMatch match_frame(std::span<const FrameObject> gt, std::span<const FrameObject> hyp, MatchMemory& memory,
                       double iou_threshold = kDefaultIouThreshold);

struct TrackClasses {
  int mostly_tracked = 0;
  int partially_tracked = 0;
  int mostly_lost = 0;
};

/// MT if fraction > 0.8, ML if fraction < 0.2, PT otherwise.
TrackClasses classify_tracks(std::span<const double> tracked_fractions);

/// Integer/decimal totals; additive across sequences.
struct MetricTotals {
  long frames = 0;
  long gt_dets = 0;
  long hyp_dets = 0;
  long fp = 0;
  long fn = 0;
  long id_switches = 0;
  long matches = 0;
  long fragmentations = 0;
  long gt_tracks = 0;
  long mostly_tracked = 0;
  long partially_tracked = 0;
  long mostly_lost = 0;
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
  double distance_sum = 0.0;
  double pixel_distance_sum = 0.0;

  MetricTotals& operator+=(const MetricTotals& o);
};

struct IdentityCounts {
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
};

/// Global one-to-one trajectory matching maximizing the number of frames where matched trajectories
/// overlap with IoU > threshold.
IdentityCounts id_metrics(const std::vector<std::vector<FrameObject>>& gt_frames,
                          const std::vector<std::vector<FrameObject>>& hyp_frames,
                          double iou_threshold = kDefaultIouThreshold);

class MetricAccumulator {
 public:
  explicit MetricAccumulator(double iou_threshold = kDefaultIouThreshold) : threshold_(iou_threshold) {}

  const FrameMatch& update(std::span<const FrameObject> gt, std::span<const FrameObject> hyp);
  const std::vector<FrameMatch>& frames() const { return frames_; }
  MetricTotals totals() const;

 private:
  double threshold_;
  MatchMemory memory_;
  std::vector<FrameMatch> frames_;
  std::vector<std::vector<FrameObject>> gt_frames_;
  std::vector<std::vector<FrameObject>> hyp_frames_;
};

/// Reported values. Percentages scaled by 100; absent when undefined (division by zero).
struct MetricReport {
  std::optional<double> idf1, idp, idr, rcll, prcn, far;
  long gt = 0, mt = 0, pt = 0, ml = 0, fp = 0, fn = 0, id = 0, fm = 0;
  std::optional<double> mota, motp, motal;
  /// Mean matched distance before the higher-is-better transform (1 - IoU or pixels).
  std::optional<double> motp_raw;
};

std::optional<double> mota(const MetricTotals& t);
/// IoU mode: 100 * (1 - mean(1 - IoU)). Pixel mode: mean center distance in pixels.
std::optional<double> motp(const MetricTotals& t, MotpMode mode = MotpMode::IouDistance);
std::optional<double> motal(const MetricTotals& t);

MetricReport make_report(const MetricTotals& t, MotpMode mode = MotpMode::IouDistance);

/// Column order of the result tables.
const std::vector<std::string>& report_columns();
/// Value of one column, formatted ("-" / "nan" when absent).
std::string format_value(const MetricReport& r, const std::string& column, bool csv);
std::string format_table(std::span<const std::pair<std::string, MetricReport>> rows);
std::string format_csv(std::span<const std::pair<std::string, MetricReport>> rows);

struct EvalOptions {
  double iou_threshold = kDefaultIouThreshold;
  /// Frames in the sequence; -1 = one past the largest frame index seen.
  int frame_count = -1;
};

/// Frame-bucketed evaluation of (frame, id, box) records.
MetricTotals evaluate(std::span<const Hypothesis> gt, std::span<const Hypothesis> hyp, const EvalOptions& opts = {});

/// Boxes for every annotation of a sequence via point_to_box.
std::vector<Hypothesis> ground_truth_boxes(const Sequence& seq, double person_extent_m = kDefaultPersonExtentM,
                                           double min_side = kDefaultMinBoxSide);

}  // namespace aerialmpt
