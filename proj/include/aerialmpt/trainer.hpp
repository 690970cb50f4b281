#pragma once

// Feedback-loop training: a batch of tracks started at random frames is advanced one frame per
// iteration by the tracker itself; each step's own estimate becomes the next step's motion and
// graph input. Gradients stop at the current step.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aerialmpt/model.hpp"
#include "aerialmpt/neighbor_graph.hpp"
#include "aerialmpt/sequence.hpp"
#include "aerialmpt/track_engine.hpp"

namespace aerialmpt {

struct TrainConfig {
  int batch_tracks = 150;
  double lr = 1e-6;
  double lr_decay = 0.1;
  int decay_every = 20000;
  int max_iters = 1000;
  std::uint64_t seed = 0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  /// (parameter name prefix, factor); the longest matching prefix wins, otherwise 1.
  std::vector<std::pair<std::string, double>> lr_multipliers;
  /// 0 disables periodic checkpoints (the final one is always written).
  int checkpoint_every = 1000;
  Ablation ablation = Ablation::Full;

  void validate() const;
  double lr_multiplier(const std::string& param_name) const;
};

/// lr * lr_decay^floor(iteration / decay_every).
double lr_at(int iteration, const TrainConfig& cfg);

struct TrackSample {
  int sequence = 0;
  int track_id = 0;
  int start_frame = 0;
  /// Feedback state; track.current_frame() is the cursor.
  Track track;

  int cursor() const { return track.current_frame(); }
};

using TrainRng = std::mt19937_64;

/// Uniform draws over (sequence, track, start index) with start index in [0, len - 2] of each
/// track's annotated frames. Tracks are distinct when the corpus has at least `count` usable
/// tracks, otherwise drawn with replacement. Throws ConfigError when no track has two frames.
std::vector<TrackSample> sample_batch(std::span<const Sequence* const> sequences, int count, TrainRng& rng,
                                      const TrackerConfig& tracker);

struct LossRecord {
  int iteration = 0;
  double lr = 0.0;
  /// Batch mean of the per-track L1 loss (summed over 4 coordinates) in output units.
  double loss = 0.0;
  /// Same error as a mean per-coordinate distance in image pixels.
  double pixel_error = 0.0;
};

class Trainer {
 public:
  Trainer(Network& net, std::vector<const Sequence*> sequences, TrainConfig cfg, TrackerConfig tracker);

  /// One iteration: forward/backward over the batch, one SGD update, advance and replace tracks.
  /// Throws TrainingError on a non-finite loss (message carries the offending batch).
  LossRecord step();

  int iteration() const { return iteration_; }
  const std::vector<TrackSample>& batch() const { return batch_; }
  const nn::ParameterSet& gradients() const { return grads_; }
  const nn::ParameterSet& velocity() const { return velocity_; }
  const TrainConfig& config() const { return cfg_; }

  /// Iteration, RNG and batch state as a JSON object.
  std::string state_json() const;
  void restore_state(const std::string& json, const nn::ParameterSet* velocity = nullptr);

 private:
  TrackSample draw_replacement(const std::set<std::pair<int, int>>& in_use);
  bool can_continue(const TrackSample& s) const;

  Network& net_;
  std::vector<const Sequence*> seqs_;
  TrainConfig cfg_;
  TrackerConfig tracker_;
  std::vector<PositionBook> books_;  // annotated positions per sequence
  TrainRng rng_;
  int iteration_ = 0;
  std::vector<TrackSample> batch_;
  nn::ParameterSet grads_;
  nn::ParameterSet velocity_;
  std::vector<double> multipliers_;  // per parameter, in parameter order
};

struct TrainOptions {
  std::filesystem::path out_dir;
  /// Checkpoint written by a previous train() call to continue from.
  std::optional<std::filesystem::path> resume;
  std::function<void(const LossRecord&)> on_iteration;
};

struct TrainResult {
  int iterations = 0;
  std::vector<LossRecord> curve;
  std::filesystem::path final_checkpoint;
};

inline constexpr const char* kLossCurveFile = "loss_curve.csv";
inline constexpr const char* kFinalCheckpoint = "model.amptnet";
/// checkpoint_NNNNNN.amptnet
std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, int iteration);

/// Runs to cfg.max_iters, writing periodic checkpoints, the final checkpoint and the loss curve
/// (CSV iteration,lr,loss,pixel_error) under opts.out_dir. With max_iters = 0 only the initial
/// checkpoint is written. On resume, `net` is replaced by the checkpointed weights.
TrainResult train(Network& net, std::span<const Sequence> data, const TrainConfig& cfg, const TrackerConfig& tracker,
                  const TrainOptions& opts);

/// Mean per-coordinate |estimate - truth| in pixels over every tracked step when the network
/// tracks each sequence from its annotations (free-running, eval mode).
struct TrackingError {
  double mean_pixel_error = 0.0;
  long steps = 0;
  long lost_tracks = 0;
  long tracks = 0;
};
TrackingError tracking_error(const Network& net, std::span<const Sequence> data, const TrackerConfig& tracker);

}  // namespace aerialmpt
