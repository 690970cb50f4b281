#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aerialmpt/error.hpp"
#include "aerialmpt/geometry.hpp"
#include "aerialmpt/sequence.hpp"

namespace aerialmpt {

// On-disk layout of one sequence directory:
//   meta.txt          key = value lines: name, frame_count, gsd, fps, and optional width, height
//   annotations.csv   header "frame,id,x,y", one point label per row
//   frames/000000.png frame images numbered %06d (PNG; .ppm also accepted)
inline constexpr const char* kMetaFile = "meta.txt";
inline constexpr const char* kAnnotationFile = "annotations.csv";
inline constexpr const char* kFramesDir = "frames";
inline constexpr const char* kManifestFile = "split.toml";

class DatasetError : public FormatError {
 public:
  enum class Kind {
    MissingMeta,
    MissingField,
    BadValue,
    BadHeader,
    MissingFrame,
    FrameSize,
    FrameOutOfRange,
    DuplicateId,
    OutOfBounds,
    InvalidId,
    IdReuse,
    UnknownSequence,
  };
  DatasetError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct LoadOptions {
  bool load_images = true;
  /// An id that disappears for more than this many frames may not come back.
  int max_id_gap = 5;
};

struct Hypothesis {
  int frame = 0;
  int track_id = 0;
  PixelBox box;
  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

std::filesystem::path frame_path(const std::filesystem::path& sequence_dir, int index);

SequenceMeta read_meta(const std::filesystem::path& path);
void write_meta(const std::filesystem::path& path, const SequenceMeta& meta);

std::vector<PointAnnotation> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, std::span<const PointAnnotation> points);

Sequence load_sequence(const std::filesystem::path& dir, const LoadOptions& opts = {});
/// Every subdirectory of `root` holding a meta.txt, sorted by name.
std::vector<Sequence> load_dataset(const std::filesystem::path& root, const LoadOptions& opts = {});
bool is_sequence_dir(const std::filesystem::path& dir);

/// CSV rows frame,id,x1,y1,x2,y2 at 4-decimal fixed precision.
void write_hypotheses(const std::filesystem::path& path, std::span<const Hypothesis> hyps);
std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path);
/// Value as it survives a write/read cycle.
double round_to_file_precision(double v);

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct SplitResult {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::vector<std::string> warnings;
};

/// TOML file with `train = [...]` and `test = [...]` arrays of sequence names.
SplitManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitResult split(std::span<const std::string> sequence_names, const SplitManifest& manifest);

}  // namespace aerialmpt
