#pragma once

// Central finite-difference check of the fused network + L1 loss.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aerialmpt/model.hpp"

namespace oracle {

struct GradInputs {
  aerialmpt::nn::Tensor3 target, search;
  aerialmpt::MotionHistory history;
  aerialmpt::NeighborGraph graph;
  std::array<double, 4> box{};
  aerialmpt::NetworkInput input() const { return {&target, &search, &history, &graph}; }
};

inline GradInputs make_grad_inputs(const aerialmpt::NetworkConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  GradInputs in;
  in.target = aerialmpt::nn::Tensor3(3, cfg.crop_size, cfg.crop_size);
  in.search = aerialmpt::nn::Tensor3(3, cfg.crop_size, cfg.crop_size);
  for (auto& v : in.target.data) v = 1.5 * u(rng);
  for (auto& v : in.search.data) v = 1.5 * u(rng);
  for (int i = 0; i < cfg.history_len; ++i) in.history.vectors.push_back({u(rng), u(rng)});
  in.graph = aerialmpt::NeighborGraph(cfg.graph_rows(), cfg.history_len);
  in.graph.valid_cols = cfg.history_len;
  for (auto& v : in.graph.values) v = 2.0 * u(rng);
  in.box = {3 + u(rng), 3 + u(rng), 6 + u(rng), 6 + u(rng)};
  return in;
}

struct GradCheckResult {
  int sampled = 0;
  int passed = 0;
  int excluded = 0;  // redrawn because the step crossed a kink
  int nonzero = 0;   // sampled coordinates with a non-negligible gradient
  double worst = 0.0;
  std::array<int, 4> per_group{};
  std::vector<std::string> failures;
};

inline double relative_error(double a, double n) {
  const double scale = std::max({std::abs(a), std::abs(n), 1e-7});
  return std::abs(a - n) / scale;
}

/// Samples `per_group` coordinates from each weight group. Coordinates whose +-h perturbation
/// changes any ReLU/max-pool state or the sign of an L1 residual are redrawn.
inline GradCheckResult run_gradcheck(aerialmpt::Network& net, const GradInputs& in, int per_group, std::uint64_t seed,
                                     double h = 1e-3, double tol = 1e-3) {
  using namespace aerialmpt;
  const ForwardOptions opts{.train = true, .dropout_seed = 99, .ablation = Ablation::Full};
  auto eval = [&](std::uint64_t* pattern, std::array<int, 4>* signs) {
    const auto pass = net.forward(in.input(), opts);
    if (pattern) *pattern = pass.activation_pattern;
    if (signs) {
      for (int k = 0; k < 4; ++k) (*signs)[k] = pass.output[k] > in.box[k] ? 1 : (pass.output[k] < in.box[k] ? -1 : 0);
    }
    return l1_loss(pass.output, in.box);
  };

  const auto base = net.forward(in.input(), opts);
  std::array<int, 4> base_signs{};
  for (int k = 0; k < 4; ++k) base_signs[k] = base.output[k] > in.box[k] ? 1 : (base.output[k] < in.box[k] ? -1 : 0);
  auto grads = net.make_gradients();
  const auto g = l1_loss_grad(base.output, in.box);
  net.backward(base, {g[0], g[1], g[2], g[3]}, grads);

  std::mt19937_64 rng(seed);
  GradCheckResult r;
  auto& params = net.params().params();
  for (std::size_t group = 0; group < Network::kGroups.size(); ++group) {
    std::vector<std::pair<std::size_t, std::size_t>> coords;  // (param, index)
    std::vector<std::size_t> members;
    std::size_t total = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (params[p].name.rfind(std::string(Network::kGroups[group]), 0) == 0) {
        members.push_back(p);
        total += params[p].value.size();
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    int done = 0, attempts = 0;
    while (done < per_group && attempts++ < per_group * 50) {
      std::size_t u = pick(rng), p = 0;
      for (std::size_t m : members) {
        if (u < params[m].value.size()) {
          p = m;
          break;
        }
        u -= params[m].value.size();
      }
      double& w = params[p].value[u];
      const double keep = w;
      std::uint64_t pat_p = 0, pat_m = 0;
      std::array<int, 4> s_p{}, s_m{};
      w = keep + h;
      const double lp = eval(&pat_p, &s_p);
      w = keep - h;
      const double lm = eval(&pat_m, &s_m);
      w = keep;
      if (pat_p != base.activation_pattern || pat_m != base.activation_pattern || s_p != base_signs || s_m != base_signs) {
        ++r.excluded;
        continue;
      }
      const double numeric = (lp - lm) / (2 * h);
      const double analytic = grads.params()[p].value[u];
      const double err = relative_error(analytic, numeric);
      ++r.sampled;
      ++r.per_group[group];
      ++done;
      if (std::abs(analytic) > 1e-7) ++r.nonzero;
      r.worst = std::max(r.worst, err);
      if (err <= tol) {
        ++r.passed;
      } else if (r.failures.size() < 10) {
        r.failures.push_back(params[p].name + "[" + std::to_string(u) + "] analytic " + std::to_string(analytic) +
                             " numeric " + std::to_string(numeric));
      }
    }
  }
  return r;
}

}  // namespace oracle
