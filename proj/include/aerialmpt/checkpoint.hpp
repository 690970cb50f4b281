#pragma once

// Weight checkpoint archive.
//
// Layout (all integers little-endian u32):
//   "AMPTNET\0"  version  header_len  header (UTF-8 JSON)  tensor_count
//   per tensor: name_len name ndim dims[ndim] float32[prod(dims)]
//
// The JSON header holds {"network": <NetworkConfig>, "state": <free-form object>}.
// Tensor names are the parameter paths of the network (snn.conv1.weight, lstm.l0.w_ih,
// lstm.proj.bias, gcnn.conv2.weight, fc.fc4.bias, ...); optimizer buffers use the prefix
// "optim.velocity.".

#include <filesystem>
#include <string>
#include <vector>

#include "aerialmpt/model.hpp"
#include "aerialmpt/nn/params.hpp"

namespace aerialmpt {

inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'P', 'T', 'N', 'E', 'T', '\0'};
inline constexpr unsigned kCheckpointVersion = 1;

struct Checkpoint {
  NetworkConfig network;
  /// JSON object text; "{}" when there is no trainer state.
  std::string state_json = "{}";
  /// Values are stored as float32; loading widens back to double.
  std::vector<nn::Param> tensors;

  const nn::Param* find(const std::string& name) const;
};

std::string network_config_to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const std::string& text);

/// Throws IoError when the file cannot be written.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError / FormatError (bad magic, version, truncation, malformed header).
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Network weights (and optional extra tensors) to a checkpoint.
Checkpoint make_checkpoint(const Network& net, const std::string& state_json = "{}");
/// Builds the network described by the header and loads every parameter.
/// Throws FormatError when a parameter is missing or has the wrong shape.
Network network_from_checkpoint(const Checkpoint& ckpt);
void load_weights(Network& net, const Checkpoint& ckpt);

void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

}  // namespace aerialmpt
