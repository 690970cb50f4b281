#pragma once

// Fused tracker network: a shared-weight twin convolutional branch over the target and search
// crops, a stacked LSTM over the track's recent motion vectors, a 1x1-convolution encoder over the
// neighbor graph, and a four-layer fully connected head regressing the box in crop coordinates.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aerialmpt/geometry.hpp"
#include "aerialmpt/image.hpp"
#include "aerialmpt/nn/layers.hpp"
#include "aerialmpt/nn/params.hpp"

namespace aerialmpt {

struct ConvSpec {
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 0;
  bool lrn = false;
  bool pool = false;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// Which feature branches feed the regression head. Disabled branches contribute zero vectors.
enum class Ablation { Snn, SnnLstm, SnnGcnn, Full };

Ablation parse_ablation(std::string_view s);
std::string_view to_string(Ablation a);
inline bool uses_lstm(Ablation a) { return a == Ablation::SnnLstm || a == Ablation::Full; }
inline bool uses_gcnn(Ablation a) { return a == Ablation::SnnGcnn || a == Ablation::Full; }
inline constexpr std::array<Ablation, 4> kAllAblations{Ablation::Snn, Ablation::SnnLstm, Ablation::SnnGcnn,
                                                       Ablation::Full};

struct NetworkConfig {
  int crop_size = 227;
  std::vector<ConvSpec> snn_channel_plan = alexnet_plan();
  int pool_kernel = 3;
  int pool_stride = 2;
  nn::LrnParams lrn{};
  int lstm_hidden = 64;
  int lstm_layers = 2;
  double lstm_dropout = 0.5;
  int motion_out_dim = 128;
  std::vector<int> graph_channels{32, 64, 128};
  int graph_neighbors = 8;
  double graph_radius_m = 7.5;
  int history_len = 5;
  std::vector<int> fc_plan{4096, 4096, 4096, 4};
  /// Input normalization: (pixel - mean[c]) * pixel_scale.
  std::array<double, 3> pixel_mean{123.0, 117.0, 104.0};
  double pixel_scale = 1.0 / 64.0;
  bool reduced_scale = false;

  static std::vector<ConvSpec> alexnet_plan();
  static NetworkConfig production() { return {}; }
  /// 64x64 crops, conv channels / 4, FC widths 256. Small enough for finite differences.
  static NetworkConfig reduced();

  void validate() const;
  int graph_rows() const { return 2 + 2 * graph_neighbors; }
  /// Spatial side of each conv stage output (shape trace of the plan).
  std::vector<int> snn_spatial_trace() const;
  int snn_branch_dim() const;
  int snn_dim() const { return 2 * snn_branch_dim(); }
  int fusion_dim() const { return snn_dim() + 2 * motion_out_dim; }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Recent motion vectors of a track in regression units, oldest first. At most history_len.
struct MotionHistory {
  std::vector<Point2> vectors;
  int valid_len() const { return static_cast<int>(vectors.size()); }
};

/// Histories padded to a common length for batched encoding; padding entries are zero.
struct PaddedMotionBatch {
  int steps = 0;
  std::vector<double> values;  // items x steps x 2
  std::vector<int> valid_len;

  int items() const { return static_cast<int>(valid_len.size()); }
  static PaddedMotionBatch pad(std::span<const MotionHistory> histories, int steps);
};

/// rows = 2 + 2 * neighbors (18 by default), cols = history_len.
/// Row 0-1: target (x, y) in crop units; rows 2k+2, 2k+3: displacement to neighbor k.
/// Columns past valid_cols are zero.
struct NeighborGraph {
  int rows = 18;
  int cols = 5;
  int valid_cols = 0;
  std::vector<double> values;  // row-major rows x cols

  NeighborGraph() = default;
  NeighborGraph(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct FeatureBundle {
  std::vector<double> out_snn;
  std::vector<double> out_lstm;
  std::vector<double> out_graph;
};

/// Per-layer hidden and cell vectors of the motion encoder.
struct MotionEncoderState {
  std::vector<std::vector<double>> hidden;
  std::vector<std::vector<double>> cell;
};

struct NetworkInput {
  const nn::Tensor3* target = nullptr;
  const nn::Tensor3* search = nullptr;
  const MotionHistory* history = nullptr;
  const NeighborGraph* graph = nullptr;
};

struct ForwardOptions {
  bool train = false;
  std::uint64_t dropout_seed = 0;
  Ablation ablation = Ablation::Full;
};

struct ForwardTape;

/// Result of one forward pass, with everything backward needs.
class ForwardPass {
 public:
  ForwardPass();
  ForwardPass(ForwardPass&&) noexcept;
  ForwardPass& operator=(ForwardPass&&) noexcept;
  ~ForwardPass();

  std::array<double, 4> output{};
  FeatureBundle features;
  Ablation ablation = Ablation::Full;
  /// Hash of every ReLU on/off state and max-pool winner; equal hashes mean the same linear region.
  std::uint64_t activation_pattern = 0;

 private:
  friend class Network;
  std::unique_ptr<ForwardTape> tape_;
};

/// Regression output to box conversions: output units are crop pixels * 10 / crop_size.
inline constexpr double kOutputRange = 10.0;

class Network {
 public:
  explicit Network(NetworkConfig cfg, std::uint64_t init_seed = 0);

  const NetworkConfig& config() const { return cfg_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  nn::ParameterSet make_gradients() const { return params_.zeros_like(); }

  /// Re-draws all weights from the fan-in scaled uniform scheme; biases zero.
  void initialize(std::uint64_t seed);

  /// Raster (crop_size x crop_size) to normalized input tensor.
  nn::Tensor3 prepare_crop(const Image& crop) const;

  std::vector<double> extract_appearance(const nn::Tensor3& target, const nn::Tensor3& search) const;
  std::vector<double> encode_branch(const nn::Tensor3& crop) const;
  /// One out_lstm vector per item. Empty histories encode a single zero vector.
  std::vector<std::vector<double>> encode_motion(const PaddedMotionBatch& batch, bool train = false,
                                                 std::uint64_t dropout_seed = 0,
                                                 MotionEncoderState* final_state = nullptr) const;
  std::vector<double> encode_motion(const MotionHistory& history) const;
  std::vector<double> encode_neighbors(const NeighborGraph& g) const;
  std::array<double, 4> regress(const FeatureBundle& bundle) const;
  PixelBox regress_box(const FeatureBundle& bundle) const { return output_to_crop_box(regress(bundle)); }

  PixelBox output_to_crop_box(const std::array<double, 4>& out) const;
  std::array<double, 4> crop_box_to_output(const PixelBox& box) const;

  ForwardPass forward(const NetworkInput& in, const ForwardOptions& opts = {}) const;
  /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
  void backward(const ForwardPass& pass, const std::array<double, 4>& grad_output, nn::ParameterSet& grads) const;

  /// Parameter name prefix for each weight group.
  static constexpr std::array<std::string_view, 4> kGroups{"snn.", "lstm.", "gcnn.", "fc."};

 private:
  void build_parameters();

  NetworkConfig cfg_;
  nn::ParameterSet params_;
};

/// Sum of absolute coordinate differences.
double l1_loss(std::span<const double> pred, std::span<const double> gt);
/// Subgradient of l1_loss w.r.t. pred; zero at equality.
std::vector<double> l1_loss_grad(std::span<const double> pred, std::span<const double> gt);

}  // namespace aerialmpt
