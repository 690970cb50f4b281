#include "aerialmpt/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace aerialmpt::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void conv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                    const ConvGeometry& g, Tensor3& out, std::vector<double>& col) {
  const int oh = g.out_size(in.height);
  const int ow = g.out_size(in.width);
  const int rows = g.in_channels * g.kernel * g.kernel;
  const int cols = oh * ow;
  col.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int c = 0; c < g.in_channels; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        double* dst = col.data() + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * cols;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          if (iy < 0 || iy >= in.height) continue;
          const double* src = in.data.data() + (static_cast<std::size_t>(c) * in.height + iy) * in.width;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            if (ix >= 0 && ix < in.width) dst[y * ow + x] = src[ix];
          }
        }
      }
    }
  }
  out = Tensor3(g.out_channels, oh, ow);
  MapConstMat W(weight.data(), g.out_channels, rows);
  MapConstMat C(col.data(), rows, cols);
  MapMat O(out.data.data(), g.out_channels, cols);
  O.noalias() = W * C;
  O.colwise() += MapConstVec(bias.data(), g.out_channels);
}

void conv2d_backward(const Tensor3& grad_out, const std::vector<double>& col, std::span<const double> weight,
                     const ConvGeometry& g, int in_h, int in_w, std::span<double> grad_weight,
                     std::span<double> grad_bias, Tensor3* grad_in) {
  const int oh = grad_out.height;
  const int ow = grad_out.width;
  const int rows = g.in_channels * g.kernel * g.kernel;
  const int cols = oh * ow;
  MapConstMat G(grad_out.data.data(), g.out_channels, cols);
  MapConstMat C(col.data(), rows, cols);
  MapMat(grad_weight.data(), g.out_channels, rows).noalias() += G * C.transpose();
  // fixed summation order; Eigen's redux peels by address and breaks run-to-run repeatability
  for (int c = 0; c < g.out_channels; ++c) {
    const double* row = grad_out.data.data() + static_cast<std::size_t>(c) * cols;
    double acc = 0.0;
    for (int i = 0; i < cols; ++i) acc += row[i];
    grad_bias[c] += acc;
  }
  if (!grad_in) return;

  RowMat dcol = MapConstMat(weight.data(), g.out_channels, rows).transpose() * G;
  *grad_in = Tensor3(g.in_channels, in_h, in_w);
  for (int c = 0; c < g.in_channels; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const double* src = dcol.data() + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * cols;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          if (iy < 0 || iy >= in_h) continue;
          double* dst = grad_in->data.data() + (static_cast<std::size_t>(c) * in_h + iy) * in_w;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            if (ix >= 0 && ix < in_w) dst[ix] += src[y * ow + x];
          }
        }
      }
    }
  }
}

void relu_inplace(std::span<double> x) {
  for (auto& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> activation, std::span<double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
  }
}

void lrn_forward(const Tensor3& in, const LrnParams& p, Tensor3& out, std::vector<double>& scale) {
  const int C = in.channels;
  const std::size_t plane = static_cast<std::size_t>(in.height) * in.width;
  const int half = p.size / 2;
  out = Tensor3(in.channels, in.height, in.width);
  scale.assign(in.size(), 0.0);
  const double a = p.alpha / p.size;
  for (std::size_t s = 0; s < plane; ++s) {
    for (int c = 0; c < C; ++c) {
      double sum = 0.0;
      const int lo = std::max(0, c - half), hi = std::min(C - 1, c + half);
      for (int j = lo; j <= hi; ++j) {
        const double v = in.data[j * plane + s];
        sum += v * v;
      }
      const double sc = p.k + a * sum;
      scale[c * plane + s] = sc;
      out.data[c * plane + s] = in.data[c * plane + s] * std::pow(sc, -p.beta);
    }
  }
}

void lrn_backward(const Tensor3& in, const Tensor3& out, const std::vector<double>& scale, const LrnParams& p,
                  const Tensor3& grad_out, Tensor3& grad_in) {
  const int C = in.channels;
  const std::size_t plane = static_cast<std::size_t>(in.height) * in.width;
  const int half = p.size / 2;
  const double coef = 2.0 * p.alpha * p.beta / p.size;
  grad_in = Tensor3(in.channels, in.height, in.width);
  std::vector<double> ratio(static_cast<std::size_t>(C));
  for (std::size_t s = 0; s < plane; ++s) {
    for (int c = 0; c < C; ++c) {
      ratio[c] = grad_out.data[c * plane + s] * out.data[c * plane + s] / scale[c * plane + s];
    }
    for (int j = 0; j < C; ++j) {
      double acc = 0.0;
      const int lo = std::max(0, j - half), hi = std::min(C - 1, j + half);
      for (int i = lo; i <= hi; ++i) acc += ratio[i];
      const std::size_t idx = j * plane + s;
      grad_in.data[idx] = grad_out.data[idx] * std::pow(scale[idx], -p.beta) - coef * in.data[idx] * acc;
    }
  }
}

int pool_out_size(int in, int kernel, int stride) {
  int out = static_cast<int>(std::ceil(static_cast<double>(std::max(in - kernel, 0)) / stride)) + 1;
  if ((out - 1) * stride >= in) --out;
  return std::max(out, 1);
}

void maxpool_forward(const Tensor3& in, int kernel, int stride, Tensor3& out, std::vector<std::int32_t>& argmax) {
  const int oh = pool_out_size(in.height, kernel, stride);
  const int ow = pool_out_size(in.width, kernel, stride);
  out = Tensor3(in.channels, oh, ow);
  argmax.assign(out.size(), 0);
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < oh; ++y) {
      const int y0 = y * stride, y1 = std::min(y0 + kernel, in.height);
      for (int x = 0; x < ow; ++x) {
        const int x0 = x * stride, x1 = std::min(x0 + kernel, in.width);
        double best = -std::numeric_limits<double>::infinity();
        std::int32_t best_idx = 0;
        for (int yy = y0; yy < y1; ++yy) {
          for (int xx = x0; xx < x1; ++xx) {
            const auto idx = static_cast<std::int32_t>((c * in.height + yy) * in.width + xx);
            if (in.data[idx] > best) {
              best = in.data[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * oh + y) * ow + x;
        out.data[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
}

void maxpool_backward(const Tensor3& grad_out, const std::vector<std::int32_t>& argmax, Tensor3& grad_in) {
  std::fill(grad_in.data.begin(), grad_in.data.end(), 0.0);
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in.data[argmax[i]] += grad_out.data[i];
}

void linear_forward(std::span<const double> x, std::span<const double> weight, std::span<const double> bias,
                    std::span<double> y) {
  const auto out = static_cast<Eigen::Index>(y.size());
  const auto in = static_cast<Eigen::Index>(x.size());
  MapVec Y(y.data(), out);
  Y.noalias() = MapConstMat(weight.data(), out, in) * MapConstVec(x.data(), in);
  Y += MapConstVec(bias.data(), out);
}

void linear_backward(std::span<const double> x, std::span<const double> weight, std::span<const double> grad_y,
                     std::span<double> grad_weight, std::span<double> grad_bias, std::span<double> grad_x) {
  const auto out = static_cast<Eigen::Index>(grad_y.size());
  const auto in = static_cast<Eigen::Index>(x.size());
  MapConstVec G(grad_y.data(), out);
  MapMat(grad_weight.data(), out, in).noalias() += G * MapConstVec(x.data(), in).transpose();
  MapVec(grad_bias.data(), out) += G;
  if (!grad_x.empty()) {
    MapVec(grad_x.data(), in).noalias() = MapConstMat(weight.data(), out, in).transpose() * G;
  }
}

void lstm_forward(const LstmWeights& w, std::span<const double> inputs, int steps, std::span<const double> h0,
                  std::span<const double> c0, LstmTape& tape) {
  const int H = w.hidden, I = w.input;
  tape.steps = steps;
  tape.inputs.assign(inputs.begin(), inputs.end());
  tape.gates.assign(static_cast<std::size_t>(steps) * 4 * H, 0.0);
  tape.cells.assign(static_cast<std::size_t>(steps + 1) * H, 0.0);
  tape.hiddens.assign(static_cast<std::size_t>(steps + 1) * H, 0.0);
  std::copy(h0.begin(), h0.end(), tape.hiddens.begin());
  std::copy(c0.begin(), c0.end(), tape.cells.begin());
  MapConstMat Wih(w.w_ih.data(), 4 * H, I);
  MapConstMat Whh(w.w_hh.data(), 4 * H, H);
  MapConstVec b(w.bias.data(), 4 * H);
  Eigen::VectorXd z(4 * H);
  for (int t = 0; t < steps; ++t) {
    z.noalias() = Wih * MapConstVec(tape.inputs.data() + static_cast<std::size_t>(t) * I, I);
    z.noalias() += Whh * MapConstVec(tape.hiddens.data() + static_cast<std::size_t>(t) * H, H);
    z += b;
    double* gate = tape.gates.data() + static_cast<std::size_t>(t) * 4 * H;
    const double* c_prev = tape.cells.data() + static_cast<std::size_t>(t) * H;
    double* c_next = tape.cells.data() + static_cast<std::size_t>(t + 1) * H;
    double* h_next = tape.hiddens.data() + static_cast<std::size_t>(t + 1) * H;
    for (int j = 0; j < H; ++j) {
      const double ig = sigmoid(z[j]);
      const double fg = sigmoid(z[H + j]);
      const double gg = std::tanh(z[2 * H + j]);
      const double og = sigmoid(z[3 * H + j]);
      gate[j] = ig;
      gate[H + j] = fg;
      gate[2 * H + j] = gg;
      gate[3 * H + j] = og;
      c_next[j] = fg * c_prev[j] + ig * gg;
      h_next[j] = og * std::tanh(c_next[j]);
    }
  }
}

void lstm_backward(const LstmWeights& w, const LstmTape& tape, std::span<const double> grad_h, LstmGrads grads,
                   std::span<double> grad_inputs) {
  const int H = w.hidden, I = w.input, T = tape.steps;
  MapConstMat Wih(w.w_ih.data(), 4 * H, I);
  MapConstMat Whh(w.w_hh.data(), 4 * H, H);
  MapMat gWih(grads.w_ih.data(), 4 * H, I);
  MapMat gWhh(grads.w_hh.data(), 4 * H, H);
  MapVec gb(grads.bias.data(), 4 * H);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dz(4 * H);
  for (int t = T - 1; t >= 0; --t) {
    const double* gate = tape.gates.data() + static_cast<std::size_t>(t) * 4 * H;
    const double* c_prev = tape.cells.data() + static_cast<std::size_t>(t) * H;
    const double* c_cur = tape.cells.data() + static_cast<std::size_t>(t + 1) * H;
    for (int j = 0; j < H; ++j) {
      const double dh = grad_h[static_cast<std::size_t>(t) * H + j] + dh_next[j];
      const double ig = gate[j], fg = gate[H + j], gg = gate[2 * H + j], og = gate[3 * H + j];
      const double tc = std::tanh(c_cur[j]);
      const double dc = dc_next[j] + dh * og * (1.0 - tc * tc);
      dz[j] = dc * gg * ig * (1.0 - ig);
      dz[H + j] = dc * c_prev[j] * fg * (1.0 - fg);
      dz[2 * H + j] = dc * ig * (1.0 - gg * gg);
      dz[3 * H + j] = dh * tc * og * (1.0 - og);
      dc_next[j] = dc * fg;
    }
    MapConstVec x(tape.inputs.data() + static_cast<std::size_t>(t) * I, I);
    MapConstVec h_prev(tape.hiddens.data() + static_cast<std::size_t>(t) * H, H);
    gWih.noalias() += dz * x.transpose();
    gWhh.noalias() += dz * h_prev.transpose();
    gb += dz;
    dh_next.noalias() = Whh.transpose() * dz;
    if (!grad_inputs.empty()) {
      MapVec(grad_inputs.data() + static_cast<std::size_t>(t) * I, I).noalias() = Wih.transpose() * dz;
    }
  }
}

}  // namespace aerialmpt::nn
