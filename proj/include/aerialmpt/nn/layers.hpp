#pragma once

// Forward/backward kernels for the layer types used by the tracker network.
// All kernels are pure functions over caller-owned buffers; double precision.

#include <cstdint>
#include <span>
#include <vector>

namespace aerialmpt::nn {

/// Channel-major C x H x W activation.
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0) {}
  std::size_t size() const { return data.size(); }
  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_size(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
  int weight_count() const { return out_channels * in_channels * kernel * kernel; }
};

/// out = W * im2col(in) + b. `col` receives the im2col matrix (needed by backward).
void conv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                    const ConvGeometry& g, Tensor3& out, std::vector<double>& col);

/// Accumulates into grad_weight / grad_bias; writes grad_in when non-null.
void conv2d_backward(const Tensor3& grad_out, const std::vector<double>& col, std::span<const double> weight,
                     const ConvGeometry& g, int in_h, int in_w, std::span<double> grad_weight,
                     std::span<double> grad_bias, Tensor3* grad_in);

void relu_inplace(std::span<double> x);
/// grad *= (activation > 0)
void relu_backward(std::span<const double> activation, std::span<double> grad);

struct LrnParams {
  int size = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  double k = 2.0;
  friend bool operator==(const LrnParams&, const LrnParams&) = default;
};

/// Cross-channel local response normalization. `scale` receives k + alpha/n * sum(x^2).
void lrn_forward(const Tensor3& in, const LrnParams& p, Tensor3& out, std::vector<double>& scale);
void lrn_backward(const Tensor3& in, const Tensor3& out, const std::vector<double>& scale, const LrnParams& p,
                  const Tensor3& grad_out, Tensor3& grad_in);

/// Pooled extent with ceil rounding, windows clipped at the border.
int pool_out_size(int in, int kernel, int stride);
void maxpool_forward(const Tensor3& in, int kernel, int stride, Tensor3& out, std::vector<std::int32_t>& argmax);
void maxpool_backward(const Tensor3& grad_out, const std::vector<std::int32_t>& argmax, Tensor3& grad_in);

/// y = W x + b with W row-major (out x in).
void linear_forward(std::span<const double> x, std::span<const double> weight, std::span<const double> bias,
                    std::span<double> y);
/// Accumulates weight/bias gradients; writes grad_x when non-empty.
void linear_backward(std::span<const double> x, std::span<const double> weight, std::span<const double> grad_y,
                     std::span<double> grad_weight, std::span<double> grad_bias, std::span<double> grad_x);

/// One LSTM layer unrolled over T steps. Gate order i, f, g, o; single bias vector.
struct LstmWeights {
  std::span<const double> w_ih;  // 4H x I
  std::span<const double> w_hh;  // 4H x H
  std::span<const double> bias;  // 4H
  int input = 0;
  int hidden = 0;
};

struct LstmTape {
  int steps = 0;
  std::vector<double> inputs;  // T x I
  std::vector<double> gates;   // T x 4H, post-activation
  std::vector<double> cells;   // (T+1) x H, row 0 = initial cell
  std::vector<double> hiddens; // (T+1) x H, row 0 = initial hidden
};

void lstm_forward(const LstmWeights& w, std::span<const double> inputs, int steps, std::span<const double> h0,
                  std::span<const double> c0, LstmTape& tape);

struct LstmGrads {
  std::span<double> w_ih;
  std::span<double> w_hh;
  std::span<double> bias;
};

/// grad_h: T x H gradient w.r.t. each step's hidden output. Writes grad_inputs (T x I) when non-empty.
void lstm_backward(const LstmWeights& w, const LstmTape& tape, std::span<const double> grad_h, LstmGrads grads,
                   std::span<double> grad_inputs);

}  // namespace aerialmpt::nn
