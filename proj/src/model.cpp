#include "aerialmpt/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

using nn::Tensor3;

Ablation parse_ablation(std::string_view s) {
  if (s == "snn") return Ablation::Snn;
  if (s == "snn+lstm") return Ablation::SnnLstm;
  if (s == "snn+gcnn") return Ablation::SnnGcnn;
  if (s == "full" || s == "snn+lstm+gcnn") return Ablation::Full;
  throw ConfigError("unknown ablation '" + std::string(s) + "' (expected snn, snn+lstm, snn+gcnn, full)");
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::Snn: return "snn";
    case Ablation::SnnLstm: return "snn+lstm";
    case Ablation::SnnGcnn: return "snn+gcnn";
    case Ablation::Full: return "full";
  }
  return "full";
}

std::vector<ConvSpec> NetworkConfig::alexnet_plan() {
  return {
      {96, 11, 4, 0, true, true},
      {256, 5, 1, 2, true, true},
      {384, 3, 1, 1, false, false},
      {384, 3, 1, 1, false, false},
      {256, 3, 1, 1, false, true},
  };
}

NetworkConfig NetworkConfig::reduced() {
  NetworkConfig c;
  c.crop_size = 64;
  for (auto& s : c.snn_channel_plan) s.out_channels /= 4;
  c.fc_plan = {256, 256, 256, 4};
  c.reduced_scale = true;
  return c;
}

void NetworkConfig::validate() const {
  if (crop_size <= 0) throw ConfigError("network: crop_size must be positive");
  if (snn_channel_plan.empty()) throw ConfigError("network: empty conv plan");
  for (const auto& s : snn_channel_plan) {
    if (s.out_channels <= 0 || s.kernel <= 0 || s.stride <= 0 || s.pad < 0) {
      throw ConfigError("network: invalid conv spec in plan");
    }
  }
  if (history_len < 1) throw ConfigError("network: history_len must be >= 1");
  if (graph_neighbors < 1) throw ConfigError("network: graph_neighbors must be >= 1");
  if (!(graph_radius_m > 0.0)) throw ConfigError("network: graph_radius_m must be positive");
  if (lstm_hidden <= 0 || lstm_layers <= 0 || motion_out_dim <= 0) throw ConfigError("network: LSTM widths must be positive");
  if (!(lstm_dropout >= 0.0 && lstm_dropout < 1.0)) throw ConfigError("network: lstm_dropout must be in [0, 1)");
  if (graph_channels.empty() || graph_channels.back() != motion_out_dim) {
    throw ConfigError("network: last graph channel count must equal motion_out_dim");
  }
  for (int c : graph_channels) {
    if (c <= 0) throw ConfigError("network: graph channels must be positive");
  }
  if (fc_plan.size() != 4 || fc_plan.back() != 4) throw ConfigError("network: fc_plan must list 4 widths ending in 4");
  for (int w : fc_plan) {
    if (w <= 0) throw ConfigError("network: fc widths must be positive");
  }
  if (!(pixel_scale > 0.0)) throw ConfigError("network: pixel_scale must be positive");
  int side = crop_size;
  for (const auto& s : snn_channel_plan) {
    if (side + 2 * s.pad < s.kernel) throw ConfigError("network: conv plan shrinks the crop to nothing");
    side = (side + 2 * s.pad - s.kernel) / s.stride + 1;
    if (side <= 0) throw ConfigError("network: conv plan shrinks the crop to nothing");
    if (s.pool) side = nn::pool_out_size(side, pool_kernel, pool_stride);
  }
}

std::vector<int> NetworkConfig::snn_spatial_trace() const {
  std::vector<int> out;
  int side = crop_size;
  for (const auto& s : snn_channel_plan) {
    side = (side + 2 * s.pad - s.kernel) / s.stride + 1;
    if (s.pool) side = nn::pool_out_size(side, pool_kernel, pool_stride);
    out.push_back(side);
  }
  return out;
}

int NetworkConfig::snn_branch_dim() const {
  const auto trace = snn_spatial_trace();
  return snn_channel_plan.back().out_channels * trace.back() * trace.back();
}

PaddedMotionBatch PaddedMotionBatch::pad(std::span<const MotionHistory> histories, int steps) {
  PaddedMotionBatch b;
  b.steps = steps;
  b.values.assign(histories.size() * static_cast<std::size_t>(steps) * 2, 0.0);
  for (std::size_t i = 0; i < histories.size(); ++i) {
    const auto& h = histories[i];
    if (h.valid_len() > steps) throw ConfigError("motion history longer than padded length");
    for (int t = 0; t < h.valid_len(); ++t) {
      b.values[(i * steps + t) * 2] = h.vectors[t].x;
      b.values[(i * steps + t) * 2 + 1] = h.vectors[t].y;
    }
    b.valid_len.push_back(h.valid_len());
  }
  return b;
}

// ----------------------------------------------------------------------------------------------

namespace {

std::string conv_name(std::size_t i) { return "snn.conv" + std::to_string(i + 1); }
std::string lstm_name(int l) { return "lstm.l" + std::to_string(l); }
std::string gcnn_name(std::size_t i) { return "gcnn.conv" + std::to_string(i + 1); }
std::string fc_name(std::size_t i) { return "fc.fc" + std::to_string(i + 1); }

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void mix(std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  }
  void mix_relu(std::span<const double> a) {
    std::uint64_t word = 0;
    int bits = 0;
    for (double v : a) {
      word = (word << 1) | (v > 0.0 ? 1u : 0u);
      if (++bits == 64) {
        mix(word);
        word = 0;
        bits = 0;
      }
    }
    mix(word);
    mix(static_cast<std::uint64_t>(a.size()));
  }
};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0); }

void fill_uniform(std::span<double> v, double bound, std::mt19937_64& rng) {
  for (auto& x : v) x = (2.0 * uniform01(rng) - 1.0) * bound;
}

}  // namespace

struct ConvLayerTape {
  int in_h = 0;
  int in_w = 0;
  std::vector<double> col;
  Tensor3 act;       // post-ReLU
  Tensor3 lrn_out;   // when lrn
  std::vector<double> lrn_scale;
  Tensor3 pre_pool;  // shape holder for pool backward
  std::vector<std::int32_t> argmax;
};

struct BranchTape {
  std::vector<ConvLayerTape> layers;
};

struct MotionTape {
  std::vector<nn::LstmTape> layers;
  std::vector<std::vector<double>> dropout_masks;  // between layer l and l+1, T x H
  std::vector<double> last_hidden;
};

struct GraphTape {
  int cols = 0;
  std::vector<double> input;                 // rows x cols (valid columns only)
  std::vector<std::vector<double>> acts;     // per layer, C_l x cols (post-ReLU)
};

struct HeadTape {
  std::vector<std::vector<double>> inputs;  // input to each fc layer
};

struct ForwardTape {
  BranchTape target;
  BranchTape search;
  MotionTape motion;
  GraphTape graph;
  HeadTape head;
};

ForwardPass::ForwardPass() = default;
ForwardPass::ForwardPass(ForwardPass&&) noexcept = default;
ForwardPass& ForwardPass::operator=(ForwardPass&&) noexcept = default;
ForwardPass::~ForwardPass() = default;

namespace {

class Forwarder {
 public:
  Forwarder(const NetworkConfig& cfg, const nn::ParameterSet& p) : cfg_(cfg), p_(p) {}

  std::vector<double> branch(const Tensor3& crop, BranchTape* tape, Fnv* fnv) const {
    if (crop.channels != 3 || crop.height != cfg_.crop_size || crop.width != cfg_.crop_size) {
      throw ConfigError("appearance encoder: crop must be 3 x " + std::to_string(cfg_.crop_size) + " x " +
                        std::to_string(cfg_.crop_size));
    }
    Tensor3 x = crop;
    int in_c = 3;
    for (std::size_t i = 0; i < cfg_.snn_channel_plan.size(); ++i) {
      const auto& s = cfg_.snn_channel_plan[i];
      const nn::ConvGeometry g{in_c, s.out_channels, s.kernel, s.stride, s.pad};
      ConvLayerTape local;
      ConvLayerTape& lt = tape ? tape->layers.emplace_back() : local;
      lt.in_h = x.height;
      lt.in_w = x.width;
      Tensor3 y;
      nn::conv2d_forward(x, p_.data(conv_name(i) + ".weight"), p_.data(conv_name(i) + ".bias"), g, y, lt.col);
      nn::relu_inplace(y.data);
      if (fnv) fnv->mix_relu(y.data);
      Tensor3 z;
      if (s.lrn) {
        nn::lrn_forward(y, cfg_.lrn, z, lt.lrn_scale);
        if (tape) lt.lrn_out = z;
      } else {
        z = y;
      }
      if (tape) lt.act = std::move(y);
      if (s.pool) {
        Tensor3 pooled;
        nn::maxpool_forward(z, cfg_.pool_kernel, cfg_.pool_stride, pooled, lt.argmax);
        if (fnv) {
          for (auto a : lt.argmax) fnv->mix(static_cast<std::uint64_t>(a));
        }
        lt.pre_pool = Tensor3(z.channels, z.height, z.width);
        lt.pre_pool.data.clear();
        lt.pre_pool.data.shrink_to_fit();
        x = std::move(pooled);
      } else {
        x = std::move(z);
      }
      if (!tape) lt.col.clear();
      in_c = s.out_channels;
    }
    return std::move(x.data);
  }

  void branch_backward(const BranchTape& tape, std::span<const double> grad_out, nn::ParameterSet& grads) const {
    const auto trace = cfg_.snn_spatial_trace();
    const auto& last = cfg_.snn_channel_plan.back();
    Tensor3 g(last.out_channels, trace.back(), trace.back());
    std::copy(grad_out.begin(), grad_out.end(), g.data.begin());
    int in_c = 3;
    std::vector<int> in_channels;
    for (const auto& s : cfg_.snn_channel_plan) {
      in_channels.push_back(in_c);
      in_c = s.out_channels;
    }
    for (std::size_t ii = cfg_.snn_channel_plan.size(); ii-- > 0;) {
      const auto& s = cfg_.snn_channel_plan[ii];
      const auto& lt = tape.layers[ii];
      if (s.pool) {
        Tensor3 gz(lt.pre_pool.channels, lt.pre_pool.height, lt.pre_pool.width);
        nn::maxpool_backward(g, lt.argmax, gz);
        g = std::move(gz);
      }
      if (s.lrn) {
        Tensor3 gy;
        nn::lrn_backward(lt.act, lt.lrn_out, lt.lrn_scale, cfg_.lrn, g, gy);
        g = std::move(gy);
      }
      nn::relu_backward(lt.act.data, g.data);
      const nn::ConvGeometry geo{in_channels[ii], s.out_channels, s.kernel, s.stride, s.pad};
      Tensor3 gin;
      nn::conv2d_backward(g, lt.col, p_.data(conv_name(ii) + ".weight"), geo, lt.in_h, lt.in_w,
                          grads.data(conv_name(ii) + ".weight"), grads.data(conv_name(ii) + ".bias"),
                          ii > 0 ? &gin : nullptr);
      if (ii > 0) g = std::move(gin);
    }
  }

  nn::LstmWeights lstm_weights(int l) const {
    const int in = l == 0 ? 2 : cfg_.lstm_hidden;
    return {p_.data(lstm_name(l) + ".w_ih"), p_.data(lstm_name(l) + ".w_hh"), p_.data(lstm_name(l) + ".bias"), in,
            cfg_.lstm_hidden};
  }

  // Runs the stacked LSTM on `steps` two-dimensional inputs and projects the final hidden state.
  std::vector<double> motion(std::span<const double> inputs, int steps, bool train, std::uint64_t seed,
                             MotionTape* tape, MotionEncoderState* state) const {
    const int H = cfg_.lstm_hidden;
    std::vector<double> zero_in(2, 0.0);
    if (steps == 0) {
      inputs = zero_in;
      steps = 1;
    }
    std::mt19937_64 rng(seed);
    std::vector<double> layer_in(inputs.begin(), inputs.end());
    std::vector<double> zeros(H, 0.0);
    MotionTape local;
    MotionTape& mt = tape ? *tape : local;
    mt.layers.assign(cfg_.lstm_layers, {});
    mt.dropout_masks.assign(cfg_.lstm_layers > 0 ? cfg_.lstm_layers - 1 : 0, {});
    if (state) {
      state->hidden.assign(cfg_.lstm_layers, {});
      state->cell.assign(cfg_.lstm_layers, {});
    }
    for (int l = 0; l < cfg_.lstm_layers; ++l) {
      nn::lstm_forward(lstm_weights(l), layer_in, steps, zeros, zeros, mt.layers[l]);
      const auto& hs = mt.layers[l].hiddens;
      if (state) {
        state->hidden[l].assign(hs.end() - H, hs.end());
        state->cell[l].assign(mt.layers[l].cells.end() - H, mt.layers[l].cells.end());
      }
      layer_in.assign(hs.begin() + H, hs.end());
      if (l + 1 < cfg_.lstm_layers && train && cfg_.lstm_dropout > 0.0) {
        auto& mask = mt.dropout_masks[l];
        mask.resize(layer_in.size());
        const double keep_scale = 1.0 / (1.0 - cfg_.lstm_dropout);
        for (std::size_t i = 0; i < mask.size(); ++i) {
          mask[i] = uniform01(rng) < cfg_.lstm_dropout ? 0.0 : keep_scale;
          layer_in[i] *= mask[i];
        }
      }
    }
    mt.last_hidden.assign(layer_in.end() - H, layer_in.end());
    std::vector<double> out(cfg_.motion_out_dim);
    nn::linear_forward(mt.last_hidden, p_.data("lstm.proj.weight"), p_.data("lstm.proj.bias"), out);
    return out;
  }

  void motion_backward(const MotionTape& mt, std::span<const double> grad_out, nn::ParameterSet& grads) const {
    const int H = cfg_.lstm_hidden;
    std::vector<double> g_last(H);
    nn::linear_backward(mt.last_hidden, p_.data("lstm.proj.weight"), grad_out, grads.data("lstm.proj.weight"),
                        grads.data("lstm.proj.bias"), g_last);
    const int T = mt.layers.back().steps;
    std::vector<double> grad_h(static_cast<std::size_t>(T) * H, 0.0);
    std::copy(g_last.begin(), g_last.end(), grad_h.end() - H);
    for (int l = cfg_.lstm_layers - 1; l >= 0; --l) {
      const auto w = lstm_weights(l);
      const bool need_inputs = l > 0;
      std::vector<double> grad_in(need_inputs ? static_cast<std::size_t>(T) * H : 0);
      nn::lstm_backward(w, mt.layers[l], grad_h,
                        {grads.data(lstm_name(l) + ".w_ih"), grads.data(lstm_name(l) + ".w_hh"),
                         grads.data(lstm_name(l) + ".bias")},
                        grad_in);
      if (need_inputs) {
        const auto& mask = mt.dropout_masks[l - 1];
        if (!mask.empty()) {
          for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] *= mask[i];
        }
        grad_h = std::move(grad_in);
      }
    }
  }

  std::vector<double> graph(const NeighborGraph& g, GraphTape* tape, Fnv* fnv) const {
    if (g.rows != cfg_.graph_rows() || g.cols != cfg_.history_len ||
        g.values.size() != static_cast<std::size_t>(g.rows) * g.cols) {
      throw ConfigError("graph encoder: expected a " + std::to_string(cfg_.graph_rows()) + " x " +
                        std::to_string(cfg_.history_len) + " neighbor matrix");
    }
    if (g.valid_cols < 0 || g.valid_cols > g.cols) throw ConfigError("graph encoder: invalid column count");
    const int cols = std::max(g.valid_cols, 1);
    std::vector<double> x(static_cast<std::size_t>(g.rows) * cols, 0.0);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.valid_cols; ++c) x[static_cast<std::size_t>(r) * cols + c] = g.at(r, c);
    }
    GraphTape local;
    GraphTape& gt = tape ? *tape : local;
    gt.cols = cols;
    gt.input = x;
    gt.acts.clear();
    int in_c = g.rows;
    std::vector<double> col_in(in_c), col_out;
    for (std::size_t li = 0; li < cfg_.graph_channels.size(); ++li) {
      const int out_c = cfg_.graph_channels[li];
      std::vector<double> y(static_cast<std::size_t>(out_c) * cols);
      col_in.resize(in_c);
      col_out.resize(out_c);
      for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < in_c; ++r) col_in[r] = x[static_cast<std::size_t>(r) * cols + c];
        nn::linear_forward(col_in, p_.data(gcnn_name(li) + ".weight"), p_.data(gcnn_name(li) + ".bias"), col_out);
        for (int r = 0; r < out_c; ++r) y[static_cast<std::size_t>(r) * cols + c] = col_out[r];
      }
      nn::relu_inplace(y);
      if (fnv) fnv->mix_relu(y);
      gt.acts.push_back(y);
      x = std::move(y);
      in_c = out_c;
    }
    std::vector<double> out(in_c, 0.0);
    for (int r = 0; r < in_c; ++r) {
      double s = 0.0;
      for (int c = 0; c < cols; ++c) s += x[static_cast<std::size_t>(r) * cols + c];
      out[r] = s / cols;
    }
    return out;
  }

  void graph_backward(const GraphTape& gt, std::span<const double> grad_out, nn::ParameterSet& grads) const {
    const int cols = gt.cols;
    const std::size_t L = cfg_.graph_channels.size();
    int out_c = cfg_.graph_channels.back();
    std::vector<double> g(static_cast<std::size_t>(out_c) * cols);
    for (int r = 0; r < out_c; ++r) {
      for (int c = 0; c < cols; ++c) g[static_cast<std::size_t>(r) * cols + c] = grad_out[r] / cols;
    }
    for (std::size_t li = L; li-- > 0;) {
      out_c = cfg_.graph_channels[li];
      const int in_c = li == 0 ? cfg_.graph_rows() : cfg_.graph_channels[li - 1];
      nn::relu_backward(gt.acts[li], g);
      const auto& x = li == 0 ? gt.input : gt.acts[li - 1];
      std::vector<double> gin(static_cast<std::size_t>(in_c) * cols, 0.0);
      std::vector<double> xc(in_c), gc(out_c), gxc(li > 0 ? in_c : 0);
      for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < in_c; ++r) xc[r] = x[static_cast<std::size_t>(r) * cols + c];
        for (int r = 0; r < out_c; ++r) gc[r] = g[static_cast<std::size_t>(r) * cols + c];
        nn::linear_backward(xc, p_.data(gcnn_name(li) + ".weight"), gc, grads.data(gcnn_name(li) + ".weight"),
                            grads.data(gcnn_name(li) + ".bias"), gxc);
        if (li > 0) {
          for (int r = 0; r < in_c; ++r) gin[static_cast<std::size_t>(r) * cols + c] = gxc[r];
        }
      }
      g = std::move(gin);
    }
  }

  std::array<double, 4> head(std::vector<double> x, HeadTape* tape, Fnv* fnv) const {
    if (tape) tape->inputs.clear();
    for (std::size_t i = 0; i < cfg_.fc_plan.size(); ++i) {
      std::vector<double> y(cfg_.fc_plan[i]);
      nn::linear_forward(x, p_.data(fc_name(i) + ".weight"), p_.data(fc_name(i) + ".bias"), y);
      if (i + 1 < cfg_.fc_plan.size()) {
        nn::relu_inplace(y);
        if (fnv) fnv->mix_relu(y);
      }
      if (tape) tape->inputs.push_back(std::move(x));
      x = std::move(y);
    }
    return {x[0], x[1], x[2], x[3]};
  }

  std::vector<double> head_backward(const HeadTape& ht, const std::array<double, 4>& grad_out,
                                    nn::ParameterSet& grads) const {
    std::vector<double> g(grad_out.begin(), grad_out.end());
    for (std::size_t i = cfg_.fc_plan.size(); i-- > 0;) {
      const auto& x = ht.inputs[i];
      std::vector<double> gx(x.size());
      nn::linear_backward(x, p_.data(fc_name(i) + ".weight"), g, grads.data(fc_name(i) + ".weight"),
                          grads.data(fc_name(i) + ".bias"), gx);
      if (i > 0) nn::relu_backward(x, gx);
      g = std::move(gx);
    }
    return g;
  }

 private:
  const NetworkConfig& cfg_;
  const nn::ParameterSet& p_;
};

}  // namespace

Network::Network(NetworkConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build_parameters();
  initialize(init_seed);
}

void Network::build_parameters() {
  int in_c = 3;
  for (std::size_t i = 0; i < cfg_.snn_channel_plan.size(); ++i) {
    const auto& s = cfg_.snn_channel_plan[i];
    params_.add(conv_name(i) + ".weight", {s.out_channels, in_c, s.kernel, s.kernel});
    params_.add(conv_name(i) + ".bias", {s.out_channels});
    in_c = s.out_channels;
  }
  const int H = cfg_.lstm_hidden;
  for (int l = 0; l < cfg_.lstm_layers; ++l) {
    const int in = l == 0 ? 2 : H;
    params_.add(lstm_name(l) + ".w_ih", {4 * H, in});
    params_.add(lstm_name(l) + ".w_hh", {4 * H, H});
    params_.add(lstm_name(l) + ".bias", {4 * H});
  }
  params_.add("lstm.proj.weight", {cfg_.motion_out_dim, H});
  params_.add("lstm.proj.bias", {cfg_.motion_out_dim});
  in_c = cfg_.graph_rows();
  for (std::size_t i = 0; i < cfg_.graph_channels.size(); ++i) {
    params_.add(gcnn_name(i) + ".weight", {cfg_.graph_channels[i], in_c});
    params_.add(gcnn_name(i) + ".bias", {cfg_.graph_channels[i]});
    in_c = cfg_.graph_channels[i];
  }
  in_c = cfg_.fusion_dim();
  for (std::size_t i = 0; i < cfg_.fc_plan.size(); ++i) {
    params_.add(fc_name(i) + ".weight", {cfg_.fc_plan[i], in_c});
    params_.add(fc_name(i) + ".bias", {cfg_.fc_plan[i]});
    in_c = cfg_.fc_plan[i];
  }
}

void Network::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_.params()) {
    const bool is_bias = p.shape.size() == 1;
    if (is_bias) {
      std::fill(p.value.begin(), p.value.end(), 0.0);
      continue;
    }
    int fan_in = 1;
    for (std::size_t d = 1; d < p.shape.size(); ++d) fan_in *= p.shape[d];
    double bound;
    if (p.name.rfind("lstm.l", 0) == 0) {
      bound = 1.0 / std::sqrt(static_cast<double>(cfg_.lstm_hidden));
    } else if (p.name == "lstm.proj.weight" || p.name == fc_name(cfg_.fc_plan.size() - 1) + ".weight") {
      bound = std::sqrt(3.0 / fan_in);  // linear output: unit-variance scaling
    } else {
      bound = std::sqrt(6.0 / fan_in);  // followed by ReLU
    }
    fill_uniform(p.value, bound, rng);
  }
}

Tensor3 Network::prepare_crop(const Image& crop) const {
  if (crop.width != cfg_.crop_size || crop.height != cfg_.crop_size) {
    throw ConfigError("prepare_crop: raster must be " + std::to_string(cfg_.crop_size) + " square");
  }
  Tensor3 t(3, crop.height, crop.width);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < crop.height; ++y) {
      for (int x = 0; x < crop.width; ++x) t.at(c, y, x) = (crop.at(x, y, c) - cfg_.pixel_mean[c]) * cfg_.pixel_scale;
    }
  }
  return t;
}

std::vector<double> Network::encode_branch(const Tensor3& crop) const {
  return Forwarder(cfg_, params_).branch(crop, nullptr, nullptr);
}

std::vector<double> Network::extract_appearance(const Tensor3& target, const Tensor3& search) const {
  Forwarder f(cfg_, params_);
  auto a = f.branch(target, nullptr, nullptr);
  const auto b = f.branch(search, nullptr, nullptr);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<std::vector<double>> Network::encode_motion(const PaddedMotionBatch& batch, bool train,
                                                        std::uint64_t dropout_seed,
                                                        MotionEncoderState* final_state) const {
  Forwarder f(cfg_, params_);
  std::vector<std::vector<double>> out;
  for (int i = 0; i < batch.items(); ++i) {
    const int n = batch.valid_len[i];
    if (n < 0 || n > batch.steps) throw ConfigError("encode_motion: invalid valid length");
    for (int t = n; t < batch.steps; ++t) {
      const std::size_t at = (static_cast<std::size_t>(i) * batch.steps + t) * 2;
      if (batch.values[at] != 0.0 || batch.values[at + 1] != 0.0) {
        throw ConfigError("encode_motion: padding entries must be zero");
      }
    }
    std::span<const double> seq(batch.values.data() + static_cast<std::size_t>(i) * batch.steps * 2,
                                static_cast<std::size_t>(n) * 2);
    out.push_back(f.motion(seq, n, train, dropout_seed + static_cast<std::uint64_t>(i), nullptr,
                           i + 1 == batch.items() ? final_state : nullptr));
  }
  return out;
}

std::vector<double> Network::encode_motion(const MotionHistory& history) const {
  const auto b = PaddedMotionBatch::pad(std::span(&history, 1), history.valid_len());
  return encode_motion(b).front();
}

std::vector<double> Network::encode_neighbors(const NeighborGraph& g) const {
  return Forwarder(cfg_, params_).graph(g, nullptr, nullptr);
}

std::array<double, 4> Network::regress(const FeatureBundle& bundle) const {
  std::vector<double> x;
  x.reserve(cfg_.fusion_dim());
  if (static_cast<int>(bundle.out_snn.size()) != cfg_.snn_dim()) throw ConfigError("regress: out_snn width mismatch");
  x.insert(x.end(), bundle.out_snn.begin(), bundle.out_snn.end());
  auto append = [&](const std::vector<double>& v, const char* what) {
    if (v.empty()) {
      x.insert(x.end(), cfg_.motion_out_dim, 0.0);
    } else if (static_cast<int>(v.size()) == cfg_.motion_out_dim) {
      x.insert(x.end(), v.begin(), v.end());
    } else {
      throw ConfigError(std::string("regress: ") + what + " width mismatch");
    }
  };
  append(bundle.out_lstm, "out_lstm");
  append(bundle.out_graph, "out_graph");
  return Forwarder(cfg_, params_).head(std::move(x), nullptr, nullptr);
}

PixelBox Network::output_to_crop_box(const std::array<double, 4>& out) const {
  const double s = cfg_.crop_size / kOutputRange;
  return {out[0] * s, out[1] * s, out[2] * s, out[3] * s};
}

std::array<double, 4> Network::crop_box_to_output(const PixelBox& b) const {
  const double s = kOutputRange / cfg_.crop_size;
  return {b.x1 * s, b.y1 * s, b.x2 * s, b.y2 * s};
}

ForwardPass Network::forward(const NetworkInput& in, const ForwardOptions& opts) const {
  if (!in.target || !in.search) throw ConfigError("forward: target and search crops are required");
  Forwarder f(cfg_, params_);
  ForwardPass pass;
  pass.ablation = opts.ablation;
  pass.tape_ = std::make_unique<ForwardTape>();
  auto& tape = *pass.tape_;
  Fnv fnv;

  auto& fb = pass.features;
  fb.out_snn = f.branch(*in.target, &tape.target, &fnv);
  const auto search = f.branch(*in.search, &tape.search, &fnv);
  fb.out_snn.insert(fb.out_snn.end(), search.begin(), search.end());

  if (uses_lstm(opts.ablation)) {
    if (!in.history) throw ConfigError("forward: motion history required for this configuration");
    if (in.history->valid_len() > cfg_.history_len) throw ConfigError("forward: motion history exceeds history_len");
    std::vector<double> seq;
    for (const auto& v : in.history->vectors) {
      seq.push_back(v.x);
      seq.push_back(v.y);
    }
    fb.out_lstm = f.motion(seq, in.history->valid_len(), opts.train, opts.dropout_seed, &tape.motion, nullptr);
  } else {
    fb.out_lstm.assign(cfg_.motion_out_dim, 0.0);
  }
  if (uses_gcnn(opts.ablation)) {
    if (!in.graph) throw ConfigError("forward: neighbor graph required for this configuration");
    fb.out_graph = f.graph(*in.graph, &tape.graph, &fnv);
  } else {
    fb.out_graph.assign(cfg_.motion_out_dim, 0.0);
  }

  std::vector<double> x;
  x.reserve(cfg_.fusion_dim());
  x.insert(x.end(), fb.out_snn.begin(), fb.out_snn.end());
  x.insert(x.end(), fb.out_lstm.begin(), fb.out_lstm.end());
  x.insert(x.end(), fb.out_graph.begin(), fb.out_graph.end());
  pass.output = f.head(std::move(x), &tape.head, &fnv);
  pass.activation_pattern = fnv.h;
  return pass;
}

void Network::backward(const ForwardPass& pass, const std::array<double, 4>& grad_output,
                       nn::ParameterSet& grads) const {
  if (!pass.tape_) throw ConfigError("backward: forward pass has no tape");
  if (!grads.same_layout(params_)) throw ConfigError("backward: gradient layout mismatch");
  Forwarder f(cfg_, params_);
  const auto& tape = *pass.tape_;
  const auto g = f.head_backward(tape.head, grad_output, grads);
  const std::size_t branch = cfg_.snn_branch_dim();
  const std::span<const double> gs(g);
  f.branch_backward(tape.target, gs.subspan(0, branch), grads);
  f.branch_backward(tape.search, gs.subspan(branch, branch), grads);
  const std::size_t m = cfg_.motion_out_dim;
  if (uses_lstm(pass.ablation)) f.motion_backward(tape.motion, gs.subspan(2 * branch, m), grads);
  if (uses_gcnn(pass.ablation)) f.graph_backward(tape.graph, gs.subspan(2 * branch + m, m), grads);
}

double l1_loss(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw ConfigError("l1_loss: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - gt[i]);
  return s;
}

std::vector<double> l1_loss_grad(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw ConfigError("l1_loss: length mismatch");
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gt[i];
    g[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }
  return g;
}

}  // namespace aerialmpt
