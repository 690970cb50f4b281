#pragma once

// TOML run configuration with [network], [train], [tracker] and [synth] tables.
// Every key is optional; unknown keys are rejected so typos surface. Command-line flags are
// applied on top of the loaded file (flag > file > built-in default).

#include <filesystem>
#include <string>

#include "aerialmpt/model.hpp"
#include "aerialmpt/synth.hpp"
#include "aerialmpt/track_engine.hpp"
#include "aerialmpt/trainer.hpp"

namespace aerialmpt {

struct RunConfig {
  /// [network] preset = "production" (default) or "reduced"; other keys override the preset.
  NetworkConfig network;
  TrainConfig train;
  TrackerConfig tracker;
  SynthConfig synth;
  /// [synth] train_sequences / test_sequences.
  int synth_train_sequences = 1;
  int synth_test_sequences = 0;
};

/// Throws ConfigError (bad value, unknown key, wrong type) or IoError.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& toml_text, const std::string& source = "config");
/// Serializes the effective configuration; parse_config(to_toml(c)) reproduces c.
std::string to_toml(const RunConfig& c);

}  // namespace aerialmpt
