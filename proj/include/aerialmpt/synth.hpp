#pragma once

// Seeded synthetic aerial-crowd sequences: small anti-aliased dots on a textured background,
// written in the dataset_io on-disk formats.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aerialmpt/geometry.hpp"
#include "aerialmpt/image.hpp"
#include "aerialmpt/sequence.hpp"

namespace aerialmpt {

enum class MotionModel { Linear, Group, Crossing, AdversarialFast };

MotionModel parse_motion_model(std::string_view s);
std::string_view to_string(MotionModel m);

struct SynthConfig {
  std::string name = "synth";
  int width = 128;
  int height = 128;
  int n_agents = 8;
  MotionModel motion = MotionModel::Linear;
  /// Per-frame displacement magnitude range in pixels.
  double speed_min = 1.0;
  double speed_max = 3.0;
  /// Group model: per-agent displacement noise (std dev, px/frame) and birth spread around the group center.
  double group_noise = 0.3;
  double group_spread = 12.0;
  double dot_radius = 3.5;
  std::array<double, 3> dot_color{235.0, 215.0, 70.0};
  /// Per-agent, per-channel uniform color offset range (+-).
  double color_jitter = 20.0;
  double background_level = 100.0;
  double background_contrast = 30.0;
  /// Value-noise lattice spacing in pixels.
  double background_cell = 16.0;
  double pixel_noise = 2.0;
  /// Agents are born at least this far from the border.
  double margin = 8.0;
  /// Adversarial-fast displacements must exceed this many dot diameters.
  double escape_factor = 2.0;
  double gsd = 0.05;
  double fps = 2.0;
  int n_frames = 10;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Trajectories only: annotations sorted by (frame, id), rounded to file precision.
/// An agent's annotations stop once it leaves the image; ids are 1..n_agents.
std::vector<PointAnnotation> synth_annotations(const SynthConfig& cfg);

/// Renders frame `index` for the given annotations (must belong to `cfg`).
Image render_frame(const SynthConfig& cfg, std::span<const PointAnnotation> annotations, int index);

/// Writes meta, annotations and frames; returns the loaded sequence.
Sequence generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// Writes `train_count + test_count` sequences under `root` (seeded from cfg.seed) plus a split manifest.
/// Sequence names are <name>_train_NNN / <name>_test_NNN.
void generate_dataset(const SynthConfig& cfg, int train_count, int test_count, const std::filesystem::path& root);

}  // namespace aerialmpt
